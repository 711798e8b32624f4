"""Smoke test for the pytofgrasp extension.

Build and install first:
    pip install --no-build-isolation -e crates/python
"""

import json
import math
import socket
import tempfile
from pathlib import Path

import pytofgrasp as tg

PRESET = """
name = "smoke"
second_reading = false

[seeds]
generate = 7
rebalance = 1
split = 2
train = 3
pipeline = 4

[[roster]]
object = "cylinder"
role = "train"
trials = 40

[[roster]]
object = "box"
role = "train"
trials = 40

[[roster]]
object = "sugar_box"
role = "validation"
trials = 20

[[roster]]
object = "mug"
role = "test"
trials = 20
"""


def main():
    assert "desk" in tg.PRESETS
    desk = tg.Preset.load("desk")
    assert len(desk.roster()) == 21

    d = tg.ray_cast_spheres([0, 0, 0], [0, 0, 1], [[0, 0, 1, 0.25]])
    assert math.isclose(d, 0.75, abs_tol=1e-12), d
    assert tg.auc([0.2, 0.8, 0.4], [False, True, True]) == 1.0

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        (tmp / "smoke.toml").write_text(PRESET)
        preset = tg.Preset.load(str(tmp / "smoke.toml"))

        trials = tg.TrialSet.generate(preset)
        assert len(trials) == 120
        again = tg.TrialSet.generate(preset)
        assert trials.labels() == again.labels()
        trials.save(str(tmp / "trials"))
        assert tg.TrialSet.load(str(tmp / "trials")).labels() == trials.labels()

        balanced = trials.rebalance(1)
        rows = balanced.features(preset)
        assert len(rows[0]) == 1028
        assert all(max(r[4::8]) <= 0.125 for r in rows)

        model = tg.Model.train(balanced, preset, "n_trees=20,max_depth=8")
        assert model.n_trees == 20
        model.save(str(tmp / "model.bin"))
        assert tg.Model.load(str(tmp / "model.bin")).hash() == model.hash()
        n, auc, acc = model.evaluate(balanced, "test")
        print(f"test: n={n} auc={auc:.3f} accuracy={acc:.3f}")

        clf = tg.Classifier(model)
        request = balanced.request(0)
        p, predicted = clf.classify(request)
        assert 0.0 <= p <= 1.0 and predicted == (p >= 0.6)
        local = json.loads(clf.respond(request))
        assert local["p_success"] == p

        bad = json.loads(request)
        bad["frames"][0]["zones"].pop()
        err = json.loads(clf.respond(json.dumps(bad)))
        assert "zones" in err["error"], err

        server = clf.serve()
        host, port = server.address.rsplit(":", 1)
        with socket.create_connection((host, int(port))) as s:
            f = s.makefile("rw")
            for _ in range(3):
                f.write(request + "\n")
            f.flush()
            replies = [json.loads(f.readline()) for _ in range(3)]
        server.shutdown()
        assert all(r["p_success"] == p for r in replies)
        assert all(r["request_id"] == local["request_id"] for r in replies)
        print(f"served p_success={p:.4f} latency={replies[0]['processing_latency_ms']:.3f} ms")

        summary = json.loads(tg.run_grid(preset, trials))
        print(f"grid: validation AUC {summary['validation_auc']:.3f}, chosen {summary['chosen']['n_trees']} trees")

    print("smoke test passed")


if __name__ == "__main__":
    main()
