#!/usr/bin/env python3
# -*- coding: utf-8 -*-

# This file is part of subgoal_hrl.
#
# subgoal_hrl is free software: you can redistribute it and/or modify
# it under the terms of the GNU Lesser General Public License as published by
# the Free Software Foundation, version 3 of the License.
#
# subgoal_hrl is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU Lesser General Public License for more details.
#
# You should have received a copy of the GNU Lesser General Public License
# along with subgoal_hrl.  If not, see <https://www.gnu.org/licenses/>.

from .common import *        # noqa: F401
from .schedules import *     # noqa: F401
from .demos import *         # noqa: F401
from .envs import *          # noqa: F401
from .factors import *       # noqa: F401
from .segmentation import *  # noqa: F401
from .tsc import *           # noqa: F401
from .hrl_core import *      # noqa: F401
from .learners import *      # noqa: F401
from .train import *         # noqa: F401
from .testkit import *       # noqa: F401
from .cli import *           # noqa: F401
