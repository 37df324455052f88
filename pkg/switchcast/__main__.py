"""
Allows running the command line as python -m switchcast
"""

from switchcast.common.cli_commands import main

if __name__ == "__main__":
    main()
