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

from .cli import main

import sys

sys.exit(main())
