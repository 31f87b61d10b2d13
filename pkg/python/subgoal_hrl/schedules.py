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

__all__ = \
    [
        "ScheduleException",

        "LinearSchedule"
    ]


class ScheduleException(Exception):
    pass


class LinearSchedule:
    """
    A value interpolated linearly from start to end over max_n advances, and
    held at end afterwards.

    Arguments:

    start  Initial value.
    end    Final value.
    max_n  Number of advances over which the value moves from start to end.
           Zero means the schedule starts at end.
    """

    def __init__(self, start, end, max_n):
        if max_n < 0:
            raise ScheduleException("Require a non-negative horizon")

        self._n = 0
        self._start = float(start)
        self._end = float(end)
        self._max_n = int(max_n)

    def n(self):
        return self._n

    def max_n(self):
        return self._max_n

    def start(self):
        return self._start

    def end(self):
        return self._end

    def value(self):
        if self._n >= self._max_n:
            return self._end
        fraction = self._n / self._max_n
        return self._start + fraction * (self._end - self._start)

    def advance(self, n=1):
        if n < 0:
            raise ScheduleException("Cannot advance backwards")
        self._n += n

    def set_n(self, n):
        if n < 0:
            raise ScheduleException("Invalid schedule position")
        self._n = int(n)
