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

import copy
import hashlib
import json
import logging
import math
import sys

__all__ = \
    [
        "canonical_real",
        "content_hash",
        "copy_parameters_dict",
        "format_real",
        "info",
        "json_dumps",
        "set_verbosity"
    ]

_logger = logging.getLogger("subgoal_hrl")
if len(_logger.handlers) == 0:
    _handler = logging.StreamHandler(sys.stdout)
    _handler.setFormatter(logging.Formatter("%(message)s"))
    _logger.addHandler(_handler)
    _logger.setLevel(logging.INFO)
    _logger.propagate = False
    del _handler


def info(message):
    _logger.info(f"{message:s}")


def set_verbosity(verbose):
    _logger.setLevel(logging.INFO if verbose else logging.WARNING)


def copy_parameters_dict(parameters):
    return copy.deepcopy(parameters)


def canonical_real(x):
    """
    Round a real to 9 significant digits. The result is a fixed point of
    format_real followed by float, so written values read back bit-exactly.
    """

    x = float(x)
    if not math.isfinite(x):
        raise ValueError("Non-finite value")
    return float(f"{x:.9g}")


def format_real(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.9g}"


def json_dumps(obj):
    """
    Deterministic JSON text: sorted keys, reals at 9 significant digits.
    """

    def canonical(o):
        if isinstance(o, bool) or o is None or isinstance(o, (int, str)):
            return o
        elif isinstance(o, float):
            return canonical_real(o)
        elif isinstance(o, dict):
            return {str(key): canonical(value) for key, value in o.items()}
        elif isinstance(o, (list, tuple)):
            return [canonical(value) for value in o]
        elif hasattr(o, "tolist"):
            return canonical(o.tolist())
        else:
            raise TypeError(f"Cannot serialize {type(o).__name__:s}")

    return json.dumps(canonical(obj), sort_keys=True, indent=1) + "\n"


def content_hash(paths=(), data=None):
    """
    SHA-256 over the contents of the given files followed by the canonical
    JSON text of data.
    """

    h = hashlib.sha256()
    for path in paths:
        with open(path, "rb") as f:
            for chunk in iter(lambda: f.read(1 << 16), b""):
                h.update(chunk)
    if data is not None:
        h.update(json_dumps(data).encode("utf-8"))
    return h.hexdigest()
