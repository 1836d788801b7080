"""Smoke test for the `codeccap` Python extension.

Builds the extension with cargo unless CODECCAP_PY_LIB points at a built
library, then drives the pipeline on the committed replay corpus.

    python3 python/smoke_test.py
"""

import json
import os
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "crates/core/tests/data/corpus"
GOLDEN = ROOT / "crates/core/tests/data/golden/clip31_document.json"


def load_module(workdir):
    lib = os.environ.get("CODECCAP_PY_LIB")
    if not lib:
        subprocess.run(["cargo", "build", "--quiet", "-p", "codeccap-py"], cwd=ROOT, check=True)
        target = Path(os.environ.get("CARGO_TARGET_DIR", ROOT / "target"))
        lib = target / "debug" / "libcodeccap.so"
    shutil.copy(lib, Path(workdir) / "codeccap.so")
    sys.path.insert(0, str(workdir))
    import codeccap

    return codeccap


def check(name, cond, detail=""):
    print(f"{'ok' if cond else 'FAIL'} {name}{': ' + str(detail) if detail and not cond else ''}")
    if not cond:
        raise SystemExit(1)


def main():
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        cc = load_module(tmp)
        clip = CORPUS / "videos/clip31"
        backend = cc.Backend({"name": "offline"}, fixtures=str(CORPUS / "replay"))
        check("backend mode", backend.mode == "replay")

        cuts = cc.import_cuts((clip / "cuts.txt").read_text())
        check("import cuts", cuts == [3.0, 21.0, 25.0], cuts)
        check("detect cuts", cc.detect_cuts(str(clip / "frames")) == cuts)

        video = {"video_id": "clip31", "path": "videos/clip31"}
        plan = cc.segment(video, (clip / "probe.json").read_text(), cuts)
        spans = [(s["start_s"], s["end_s"]) for s in plan["segments"]]
        check("segments", spans == [(0.0, 3.0), (3.0, 21.0), (21.0, 25.0), (25.0, 31.0)], spans)

        captions = cc.caption(plan, str(clip / "frames"), backend)
        check("captions per segment", len(captions) == 4)
        doc, audit = cc.aggregate(plan, captions)
        doc.validate()
        check("golden document", doc.to_json().encode() == GOLDEN.read_bytes())
        check("no-change residuals", doc.residuals[0][0][1] == cc.NO_VISIBLE_CHANGE)
        check("audit per segment", len(audit["segments"]) == 4, list(audit))
        check("no upstream calls", backend.upstream_calls == 0)

        report = cc.run_forge(str(CORPUS / "manifest.jsonl"), str(tmp / "state"), backend, config={"workers": 2})
        check("forge done", all(j["stage"] == "done" for j in report["jobs"]), report["jobs"])
        jobs, docs = cc.load_state(str(tmp / "state"))
        check("state documents", sorted(d.video_id for d in docs) == ["clip31", "lecture", "studio"])
        stats = cc.corpus_stats(docs)
        check("stats", stats["video_count"] == 3, stats)

        baseline = json.loads((clip / "baseline.json").read_text())
        red = cc.redundancy(doc, baseline)
        check("redundancy", red["baseline_words"] > red["codec_words"] and red["duplicate_instances"] >= 5, red)

        available = {c: [20, 20, 20, 20] for c in [
            "action_recognition", "attribute_recognition", "camera_movement", "counting",
            "direction", "holistic_understanding", "object_tracking", "reasoning", "rotation",
            "speed", "state_change", "temporal_grounding", "temporal_sequence",
        ]}
        available["trajectory"] = [11, 10, 10, 10]
        alloc = cc.allocate_budget(available, 1000)
        check("allocation", alloc["trajectory"] == 41 and sum(alloc.values()) == 1000, alloc)
        check("difficulty targets", cc.difficulty_targets(74) == [22, 26, 19, 7])
        check("phase a", cc.phase_a(0, [0, 0, "unknown"]) == "normal")
        check("phase b", cc.phase_b([True, True, False]) == "likely_correct")

        results = [
            {"question_id": f"q{i}", "capability": "counting", "predicted": 0 if i < 3 else "unknown",
             "rationale": "", "observation": "", "correct": i < 3, "parse_failure": False, "errored": False}
            for i in range(5)
        ]
        metrics = cc.compute_metrics(results, seed=1, resamples=200)
        check("metrics", abs(metrics["accuracy"]["value"] - 0.6) < 1e-12, metrics["accuracy"])
        check("table", "overall" in cc.render_table(metrics))

        empty = cc.Backend({"name": "offline"}, fixtures=str(tmp / "none"))
        try:
            cc.caption(plan, str(clip / "frames"), empty)
            check("replay miss raises", False)
        except cc.BackendError as e:
            check("replay miss raises", "replay fixture missing for request" in str(e), e)
        try:
            cc.segment(video, "", cuts)
            check("bad input raises", False)
        except cc.InputError:
            check("bad input raises", True)
    print("python smoke test passed")


if __name__ == "__main__":
    main()
