"""Cercignani-Lampis wall scattering and kinetic-theory toolkit"""

__version__ = "0.3.2"  # This is used by flit and other pypi things
