# Copyright 2026 The steinest Authors.
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

"""Diffusion Stein discrepancy estimators."""

import json

from ._steinest import (
    ConfigError,
    NumericalError,
    closed_form,
    diffusions,
    dksd,
    dsm,
    kernels,
    models,
    presets,
    sample,
)
from . import _steinest


def run_experiment(config):
    """Runs every replication of `config` (a dict) and returns the summary."""
    return json.loads(_steinest._run_experiment(json.dumps(config)))


def run_preset(name, out_dir, seed=0, replications=0):
    """Runs a bundled experiment, writing its files under out_dir."""
    return json.loads(_steinest._run_preset(name, str(out_dir), seed, replications))


__all__ = [
    "ConfigError",
    "NumericalError",
    "closed_form",
    "diffusions",
    "dksd",
    "dsm",
    "kernels",
    "models",
    "presets",
    "run_experiment",
    "run_preset",
    "sample",
]
