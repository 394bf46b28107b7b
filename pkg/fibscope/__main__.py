# © Copyright 2021 Łukasz Langa.  Licensed under Apache License, Version 2.0.

import sys

from fibscope.cli import main

sys.exit(main())
