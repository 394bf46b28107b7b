# © Copyright 2021 Łukasz Langa.  Licensed under Apache License, Version 2.0.

__version__ = '24.3.0'
__author__ = 'Łukasz Langa'


from rich.console import Console

from . import env

console = Console(quiet=env.FIBSCOPE_QUIET)
err_console = Console(stderr=True, highlight=False)
