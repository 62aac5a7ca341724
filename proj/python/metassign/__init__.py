# Copyright 2026 The metassign Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Python bindings for the metassign C++ library."""

import json as _json

from ._core import *  # noqa: F401,F403
from ._core import meta_test as _meta_test


def meta_test(params, dataset, config):
    """Adapt to each held-out task and return the report as a dict."""
    return _json.loads(_meta_test(params, dataset, config))


__version__ = "0.1.0"
