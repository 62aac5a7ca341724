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
"""Smoke tests for the Python bindings."""

import json
import pathlib

import pytest

import metassign as ma

ROOT = pathlib.Path(__file__).resolve().parents[2]


def two_link_network():
    text = """<NUMBER OF ZONES> 2
<NUMBER OF NODES> 2
<FIRST THRU NODE> 1
<NUMBER OF LINKS> 2
<END OF METADATA>

~ init_node term_node capacity length free_flow_time b power speed toll link_type ;
1 2 1.0 0 1.0 1.0 1 0 0 1 ;
1 2 1.0 0 2.0 0.5 1 0 0 1 ;
"""
    return ma.parse_network(text)


def test_two_link_equilibrium():
    net = two_link_network()
    od = ma.ODMatrix(0, 2)
    od[0, 1] = 3.0
    res = ma.solve_ue(net, od, gap=1e-10, max_iterations=10000)
    assert res["converged"]
    assert res["flows"] == pytest.approx([2.0, 1.0], abs=1e-3)
    assert res["costs"][0] == pytest.approx(res["costs"][1], rel=1e-3)


def test_masked_edge_carries_nothing():
    net = two_link_network()
    od = ma.ODMatrix(0, 2)
    od[0, 1] = 3.0
    res = ma.solve_ue(net, od, present=[True, False])
    assert res["flows"] == [3.0, 0.0]
    with pytest.raises(ma.ScenarioInfeasibleError):
        ma.solve_ue(net, od, present=[False, False])


def test_bpr_and_r_squared():
    assert ma.bpr_cost(10, 1000, 0.15, 4, 1000) == pytest.approx(11.5)
    assert ma.r_squared([0, 1, 2], [0, 1, 1]) == pytest.approx(0.5)
    with pytest.raises(ma.MetricError):
        ma.r_squared([1, 1], [0, 1])


def test_config_errors():
    with pytest.raises(ma.ConfigError):
        ma.RunConfig.parse('{"meta": {"nope": 1}}')
    defaults = json.loads(ma.RunConfig().to_json())
    assert defaults["meta"]["K"] == 4


def test_pipeline(tmp_path):
    config = ma.RunConfig.load(str(ROOT / "configs" / "smoke.json"))
    net = ma.synthetic_grid_network(2, 5, 12, 3)
    base = ma.synthetic_base_od(net, 40.0, 3)
    data = ma.generate_dataset(net, base, config)
    assert data.sample_count == 80
    path = tmp_path / "data.masg"
    data.save(str(path))
    data = ma.Dataset.load(str(path))

    init = ma.init_params(data, config)
    best, final, history, best_iteration = ma.meta_train(data, init, config)
    assert len(history) == 50
    assert 1 <= best_iteration <= 50
    ckpt = tmp_path / "theta.mawt"
    best.save(str(ckpt))
    assert ma.Params.load(str(ckpt)).parameter_count == best.parameter_count

    report = ma.meta_test(best, data, config)
    assert len(report["tasks"]) == 2
    for task in report["tasks"]:
        assert task["r_squared"] <= 1.0

    t = data.test_task_ids[0]
    pred = ma.predict(best, data, t, data.test_od_ids[0])
    closed = [i for i, open_ in enumerate(data.present(t)) if not open_]
    assert all(pred[i] == 0.0 for i in closed)


def test_cli_entry():
    code, out, err = ma.cli(["print-config"])
    assert code == 0
    assert json.loads(out)["generation"]["n_tasks"] == 336
    code, _, err = ma.cli(["meta-test"])
    assert code == 2
