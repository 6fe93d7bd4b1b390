#!/usr/bin/env python3
"""End-to-end exercise of the conserva_py extension module.

Builds nothing itself: run `cargo build -p conserva-py` (or `--release`)
first, then `python3 python/smoke_test.py`. The script loads the compiled
extension straight from the cargo target directory, generates the demo
corpus in a temporary directory, and walks the whole pipeline: parse,
mutate, probe for conserved features, unify, map to other vocabularies,
train, attack, harden, evaluate.
"""

import sys
import tempfile
from importlib.machinery import ExtensionFileLoader
from importlib.util import module_from_spec, spec_from_loader
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent

CONSERVED = [
    "/Names",
    "/Names/JavaScript",
    "/Names/JavaScript/Names",
    "/Names/JavaScript/Names/JS",
    "/OpenAction",
    "/OpenAction/JS",
]


def load_module():
    candidates = [
        REPO / "target" / "release" / "libconserva_py.so",
        REPO / "target" / "debug" / "libconserva_py.so",
    ]
    for so in candidates:
        if so.exists():
            loader = ExtensionFileLoader("conserva_py", str(so))
            spec = spec_from_loader("conserva_py", loader)
            module = module_from_spec(spec)
            loader.exec_module(module)
            print(f"loaded {so}")
            return module
    sys.exit(
        "conserva_py is not built; run `cargo build -p conserva-py` first "
        f"(looked in {', '.join(str(c) for c in candidates)})"
    )


def main():
    cp = load_module()
    tmp = Path(tempfile.mkdtemp(prefix="conserva-smoke-"))
    corpus = cp.write_demo_corpus(str(tmp / "corpus"))

    seeds = []
    for path in sorted(Path(corpus["seeds_dir"]).glob("*.pdf")):
        seeds.append((path.stem, cp.parse_pdf(path.read_bytes())))
    benign = []
    for path in sorted(Path(corpus["benign_dir"]).glob("*.pdf")):
        benign.append((path.stem, cp.parse_pdf(path.read_bytes())))
    donor = cp.parse_pdf(Path(corpus["donor"]).read_bytes())
    assert len(seeds) == 4 and len(benign) == 3
    print(f"parsed {len(seeds)} malicious and {len(benign)} benign documents")

    oracle = cp.RuleOracle(Path(corpus["rules"]).read_text())
    assert oracle.verdict(seeds[0][1])["outcome"] == "malicious"
    assert oracle.verdict(benign[0][1])["outcome"] == "benign"

    # Deleting a path removes it; the flip list says what fell with it.
    graph = seeds[0][1]
    target = "/OpenAction/JS"
    assert target in graph.paths()
    mutated, flipped = graph.delete_path(target)
    assert target in flipped and target not in mutated.paths()
    assert oracle.verdict(mutated)["outcome"] == "benign"
    print(f"deleting {target} disarms {seeds[0][0]}")

    # Conserved-feature probing and unification.
    result = cp.conserve(seeds, donor, oracle, beta=3)
    assert result["skipped"] == []
    assert len(result["per_seed"]) == 4
    assert result["uniform"]["S"] == CONSERVED
    print(f"conserved features: {result['uniform']['S']}")

    # The per-seed dicts round-trip through standalone unification.
    again = cp.forward_elimination(result["per_seed"], beta=3)
    assert again["S"] == result["uniform"]["S"]

    # Mapping onto the other vocabularies.
    hidost = cp.map_to_hidost(result["uniform"]["S"])
    assert hidost["features"] == CONSERVED  # no rules: identity mapping
    counts = cp.map_to_counts(seeds, result["per_seed"], beta=3)
    assert counts["uniform"]["S"] == ["count_javascript", "count_js"]
    print(f"count-feature view: {counts['uniform']['S']}")

    # Train a classifier on the corpus.
    space = cp.build_space([g for _, g in seeds] + [g for _, g in benign])
    rows, labels = [], []
    mal_rows = []
    for _, g in seeds:
        bits, ignored = space.vectorize(g)
        assert ignored == 0
        rows.append(bits)
        labels.append(1)
        mal_rows.append(bits)
    for _, g in benign:
        bits, _ = space.vectorize(g)
        rows.append(bits)
        labels.append(0)
    model = cp.train_model(
        space, rows, labels, {"reg": {"kind": "l2", "c": 4.0}, "epochs": 200}
    )
    report = cp.evaluate(model, rows, labels)
    assert report["accuracy"] == 1.0 and report["auc"] == 1.0
    print(f"trained on {len(rows)} rows: accuracy {report['accuracy']}, auc {report['auc']}")

    # The model survives a JSON round trip.
    clone = cp.LinearModel.from_json(model.to_json(), space)
    assert clone.score(rows[0]) == model.score(rows[0])

    # Unrestricted greedy evasion defeats the baseline...
    cg = {"kind": "coordinate_greedy", "rng_seed": 7}
    one = cp.attack(model, mal_rows[0], cg)
    assert one["evaded"] and not model.is_malicious(one["variant"])
    baseline = cp.robustness(model, mal_rows, cg)
    print(f"baseline evasion rate: {baseline['evasion_rate']}")

    # ...and iterative retraining on the same attack repairs it.
    hardened, info = cp.retrain(
        space,
        rows,
        labels,
        mal_rows,
        attack=cg,
        params={"reg": {"kind": "l2", "c": 4.0}, "epochs": 200},
        max_iterations=6,
    )
    hard = cp.robustness(hardened, mal_rows, cg)
    hard_report = cp.evaluate(hardened, rows, labels)
    assert hard["evasion_rate"] <= baseline["evasion_rate"]
    assert hard_report["auc"] >= report["auc"] - 0.02
    print(
        f"retrained in {len(info['iterations'])} iterations "
        f"({info['final_dataset_size']} rows): evasion rate {hard['evasion_rate']}"
    )

    # Metric sanity: the textbook concordance example.
    assert abs(cp.auc([(0.9, 1), (0.7, 1), (0.8, 0), (0.1, 0)]) - 0.75) < 1e-12

    print("smoke test passed")


if __name__ == "__main__":
    main()
