"""
Cross-cutting helpers: logging, exit codes, error handling, output writers
and the command line
"""
