# © Copyright 2021 Łukasz Langa.  Licensed under Apache License, Version 2.0.

from __future__ import annotations
from typing import *

import os

from dotenv import load_dotenv

load_dotenv()
FIBSCOPE_THREADS = int(os.environ.get("FIBSCOPE_THREADS", 0)) or (os.cpu_count() or 1)
FIBSCOPE_QUIET = os.environ.get("FIBSCOPE_QUIET", "") not in ("", "0")
FIBSCOPE_DB = os.environ.get("FIBSCOPE_DB", "")
FIBSCOPE_CONFIG = os.environ.get("FIBSCOPE_CONFIG", "fibscope.toml")
