import importlib.util
import os
import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]

SCRIPT = """
from tracklet_reid import kernels, synth
from tracklet_reid.motio import write_results
from tracklet_reid.trackers import EVAL_SORT_CONFIG, SortTracker, run_tracker
bundle = synth.generate(synth.preset("crowded", seed=2)).bundle
print(kernels.BACKEND)
print(write_results(run_tracker(SortTracker(EVAL_SORT_CONFIG), bundle).results), end="")
"""


def _run(pure: bool) -> list[str]:
    env = dict(os.environ)
    env.pop("TRACKLET_REID_PURE", None)
    if pure:
        env["TRACKLET_REID_PURE"] = "1"
    out = subprocess.run([sys.executable, "-c", SCRIPT], env=env, cwd=ROOT, capture_output=True, text=True, check=True)
    return out.stdout.split("\n", 1)


def test_backend_selection_and_agreement():
    pure_backend, pure_results = _run(pure=True)
    assert pure_backend == "python"
    default_backend, default_results = _run(pure=False)
    built = importlib.util.find_spec("tracklet_reid._ckernels") is not None
    assert default_backend == ("cython" if built else "python")
    assert pure_results == default_results
