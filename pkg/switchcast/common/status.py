# coding: utf8
"""
Descriptive process exit codes, for code readability.
Modeled on the BSD sysexits table.
"""

# Success
EX_OK = 0

# Generic failure
EX_FAILURE = 1

# A runtime invariant check failed
EX_INVARIANT = 3

# Usage and input problems - 6x
EX_USAGE = 64
EX_DATAERR = 65
EX_NOINPUT = 66

# Internal problems - 7x
EX_SOFTWARE = 70
EX_IOERR = 74
EX_CONFIG = 78
