"""Smoke test for the featstab_py extension.

Builds the extension with cargo, copies the shared library next to a temporary
import path and exercises each exported function once.

    python3 python/smoke_test.py
"""

import math
import pathlib
import random
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parents[1]


def build_and_import(tmp):
    subprocess.run(["cargo", "build", "--release", "-p", "featstab-py"], cwd=ROOT, check=True)
    lib = ROOT / "target" / "release" / "libfeatstab_py.so"
    shutil.copy(lib, tmp / "featstab_py.so")
    sys.path.insert(0, str(tmp))
    import featstab_py

    return featstab_py


def close(a, b, tol):
    return abs(a - b) <= tol


def main():
    with tempfile.TemporaryDirectory() as tmp:
        tmp = pathlib.Path(tmp)
        fs = build_and_import(tmp)

        assert close(fs.bessel_k(0.5, 1.0), math.sqrt(math.pi / 2) * math.exp(-1), 1e-9)
        assert close(fs.matern_cov(0.3, 2.0, 0.5, 0.7), 2.0 * math.exp(-0.3 / 0.7), 1e-12)
        assert close(fs.fp_bound(2.0, 10, 0.75), 0.8, 1e-12)
        assert fs.selection_stability([[0], [0, 2]], 3) == [1.0, 0.0, 0.5]

        rng = random.Random(0)
        x = [[rng.gauss(0, 1) for _ in range(4)] for _ in range(80)]
        y = [2 * row[0] + rng.gauss(0, 0.5) for row in x]
        coefs = fs.lasso_path(x, y, [1.0, 0.1])
        assert len(coefs) == 2 and coefs[1][0] > 1.5
        pi_hat, grid = fs.selection_probabilities(x, y, seed=1, n_reps=20, n_lambda=10)
        assert len(pi_hat) == 4 and len(grid) == 10
        assert max(pi_hat[0]) == 1.0

        c, s = math.cos(0.4), math.sin(0.4)
        a = [[rng.gauss(0, 1) for _ in range(2)] for _ in range(30)]
        means = [sum(col) / len(a) for col in zip(*a)]
        a = [[v - m for v, m in zip(r, means)] for r in a]
        b = [[r[0] * c - r[1] * s, r[0] * s + r[1] * c] for r in a]
        rot = fs.procrustes_pair(a, b)
        back = [[sum(r[k] * rot[k][j] for k in range(2)) for j in range(2)] for r in b]
        assert all(close(u, v, 1e-9) for ru, rv in zip(back, a) for u, v in zip(ru, rv))
        fss, mean, aligned = fs.generalized_procrustes([a, b])
        assert fss < 1e-12 and len(aligned) == 2 and len(mean) == 30
        assert close(fs.svcca_similarity(a, b, 2), 1.0, 1e-6)

        data = tmp / "data"
        assert fs.simulate(str(data), 40, seed=3, width=16, height=16) == 40
        out = fs.run_all(str(data), str(tmp / "run"), seed=3, b=2, k=3, n_patches=16, patch_size=4, n_subsamples=10)
        assert len(out["ss_scores"]) == 3 and out["fss"] >= 0.0
        assert (tmp / "run" / "embeddings.csv").exists()

        try:
            fs.bessel_k(1.0, -1.0)
        except ValueError:
            pass
        else:
            raise AssertionError("negative argument should raise ValueError")

    print("featstab_py smoke test passed")


if __name__ == "__main__":
    main()
