"""Smoke test for the nvx Python extension.

Build the extension first (`cargo build -p nvx-py --release`), then run
`python3 python/smoke_test.py`. The script copies the built library next to a
temporary `nvx` module name so no install step is needed.
"""

import importlib
import math
import os
import shutil
import sys
import sysconfig
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def load_extension():
    names = {"linux": "libnvx_py.so", "darwin": "libnvx_py.dylib", "win32": "nvx_py.dll"}
    lib = names.get(sys.platform, "libnvx_py.so")
    for profile in ("release", "debug"):
        path = os.path.join(ROOT, "target", profile, lib)
        if os.path.exists(path):
            break
    else:
        sys.exit("extension not built; run `cargo build -p nvx-py --release`")
    tmp = tempfile.mkdtemp()
    suffix = sysconfig.get_config_var("EXT_SUFFIX") or ".so"
    shutil.copy(path, os.path.join(tmp, "nvx" + suffix))
    sys.path.insert(0, tmp)
    return importlib.import_module("nvx")


def main():
    nvx = load_extension()

    for op, err, tol, ok in nvx.gradcheck(0):
        assert ok, f"{op}: {err} > {tol}"
        print(f"gradcheck {op:<15} {err:.2e} <= {tol:.0e}")

    corpus = nvx.Corpus.synthetic(n=12, t_min=10, t_max=14, seed=1)
    assert len(corpus) == 12
    utt = corpus.utterance(corpus.ids()[0])
    t = len(utt["eeg"])
    assert len(utt["eeg"][0]) == 30 and len(utt["articulatory"][0]) == 6 and len(utt["mfcc"][0]) == 13
    print(f"corpus: {len(corpus)} utterances, first has {t} frames")

    assert nvx.mcd(utt["mfcc"], utt["mfcc"]) == 0.0
    shifted = [[v + (1.0 if j == 1 else 0.0) for j, v in enumerate(row)] for row in utt["mfcc"]]
    expected = 10.0 / math.log(10.0) * math.sqrt(2.0)
    assert abs(nvx.mcd(shifted, utt["mfcc"]) - expected) < 1e-12

    pipe = nvx.Pipeline.train(corpus, approach="two-step", epochs=3, batch_size=4, reduce=False, seed=5)
    assert pipe.n_stages() == 2
    pred = pipe.predict_mfcc(utt["eeg"])
    assert len(pred) == t and len(pred[0]) == 13

    with tempfile.TemporaryDirectory() as d:
        ckpt = os.path.join(d, "m.ckpt")
        pipe.save(ckpt)
        again = nvx.Pipeline.load(ckpt)
        assert again.predict_mfcc(utt["eeg"]) == pred
        assert again.to_bytes() == pipe.to_bytes()

    report = pipe.evaluate(corpus)
    print(f"test MCD {report['average_mcd']:.3f} (floor {report['baseline_mean_predictor_mcd']:.3f})")

    samples = nvx.vocode(pred, rate=100, iterations=8)
    assert len(samples) > 0 and all(math.isfinite(s) for s in samples)
    print(f"vocoded {len(samples)} samples")
    print("smoke test passed")


if __name__ == "__main__":
    main()
