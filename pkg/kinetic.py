#!/usr/bin/env python
################################################################################
#                                 kinetic.py                                   #
################################################################################
#                                                                              #
#  DESCRIPTION:  Launcher for the clkinetic command line from a source         #
#                checkout (same as the installed "clkinetic" script).          #
#                                                                              #
#  INVOCATION:                                                                 #
#                $ python -u kinetic.py figures --which 2 --out out            #
#                $ python -u kinetic.py --help                                 #
#                                                                              #
################################################################################

import sys
import signal

from clkinetic import cli
from clkinetic import applog

def signal_handler(signal, frame):
    print('\rInterrupted by Ctrl-C...shutting down', end=' ')
    applog.explicit_log_close()
    sys.exit(1)

if __name__ == "__main__":
    signal.signal(signal.SIGINT, signal_handler)
    sys.exit(cli.main(sys.argv))
