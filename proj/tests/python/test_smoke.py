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

import math

import pytest

import bygrad


def test_lemma1_matches_enumeration():
    for n, h, d in [(6, 4, 2), (8, 5, 3), (10, 7, 10)]:
        assert bygrad.lemma1_enumerate_cyclic(n, h, d) == pytest.approx(
            bygrad.lemma1_value(n, h, d), abs=1e-12)


def test_d_threshold():
    assert bygrad.d_threshold(100, 65, 1.5) == 3


def test_constants_collapse_first_pair():
    p = bygrad.TheoryParams()
    p.delta = 0.0
    c = bygrad.compute_constants(p)
    assert c["kappa1"] == pytest.approx(c["xi1"], rel=1e-12)
    assert c["kappa2"] == pytest.approx(c["xi2"], rel=1e-12)


def test_aggregate_and_compress():
    msgs = [[1.0, 2.0], [1.0, 2.0], [100.0, -50.0]]
    assert bygrad.aggregate("mean", msgs) == pytest.approx([34.0, -46.0 / 3.0])
    out = bygrad.compress("sparsify:1", [3.0, 4.0], 5)
    assert sorted(v != 0.0 for v in out) == [False, True]
    assert bygrad.delta_of("sparsify:1", 2) == 1.0


def test_run_is_deterministic():
    cfg = bygrad.ExperimentConfig()
    cfg.method = "LAD"
    cfg.N, cfg.H, cfg.d, cfg.Q, cfg.T = 10, 8, 2, 5, 20
    cfg.gamma = 1e-4
    cfg.aggregator = "cwtm:0.1"
    a, b = bygrad.run(cfg), bygrad.run(cfg)
    assert len(a.rows) == 21
    assert a.final_model == b.final_model
    assert math.isfinite(a.final_loss())
    assert a.final_loss() <= a.rows[0].loss


def test_invalid_config_raises():
    cfg = bygrad.ExperimentConfig()
    cfg.H = 10
    with pytest.raises(ValueError):
        cfg.validate()
