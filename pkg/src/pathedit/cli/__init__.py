"""CLI module for PathEdit.

This package contains the entry point and the subcommands of the
command-line experiment harness.
"""
