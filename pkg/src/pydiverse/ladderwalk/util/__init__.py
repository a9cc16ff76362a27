from __future__ import annotations

from .deep_merge import deep_merge
from .import_ import requires
