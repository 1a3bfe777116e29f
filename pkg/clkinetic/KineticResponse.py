from typing import Any
from enum import Enum
from dataclasses import dataclass, field

class ErrorLevel(Enum):
    ok = 0
    low = 1
    medium = 2
    high = 3

##
# What every CLI command hands back to the dispatcher: the payload, the list of
# files it wrote, and whether it finished cleanly, finished with a theorem
# hypothesis warning, or failed.
@dataclass
class KineticResponse:
    data: Any           = None
    error_msg: str      = ''
    error_lvl: ErrorLevel = ErrorLevel.ok
    hypothesis_warning: bool = False
    artifacts: list     = field(default_factory=list)

    @property
    def failed(self):
        return self.error_lvl.value > ErrorLevel.low.value

    def exit_code(self):
        if self.failed:
            return 1
        if self.hypothesis_warning:
            return 2
        return 0

    def __str__(self):
        return f"<KineticResponse ({id(self)}), {self.error_lvl}, hypothesis_warning {self.hypothesis_warning}, error_msg {self.error_msg}, artifacts {len(self.artifacts)}>"

# ##############################################################################
#                                                                              #
#                                 Exceptions                                   #
#                                                                              #
# ##############################################################################

class KineticError(Exception):
    pass

## A mathematical precondition was violated (bad parameters, wrong-sign velocity).
class DomainError(KineticError, ValueError):
    pass

##
# One or more configuration problems. errors is a list of (line, message)
# tuples; line is None for problems not tied to a config-file line.
class ConfigurationError(KineticError):
    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [(None, errors)]
        self.errors = list(errors)
        super().__init__("; ".join(self.format_error(line, msg) for line, msg in self.errors))

    @staticmethod
    def format_error(line, msg):
        if line is None:
            return msg
        return f"line {line}: {msg}"

## The slab iteration blew up; report holds everything computed so far.
class DivergenceError(KineticError):
    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report

class ConsistencyError(KineticError):
    pass
