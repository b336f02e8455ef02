# Copyright 2026 The bygrad Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Python access to the bygrad simulator, theory constants and checks."""

from ._bygrad import (
    ExperimentConfig,
    IterationRecord,
    RunRecord,
    TheoryParams,
    aggregate,
    asymptotic_error_term,
    compress,
    compute_constants,
    d_threshold,
    delta_of,
    lemma1_enumerate_cyclic,
    lemma1_value,
    run,
    sweep,
    verify,
)

__all__ = [
    "ExperimentConfig",
    "IterationRecord",
    "RunRecord",
    "TheoryParams",
    "aggregate",
    "asymptotic_error_term",
    "compress",
    "compute_constants",
    "d_threshold",
    "delta_of",
    "lemma1_enumerate_cyclic",
    "lemma1_value",
    "run",
    "sweep",
    "verify",
]
