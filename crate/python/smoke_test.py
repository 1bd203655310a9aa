"""Smoke test for the fkcrit Python extension."""

import math

import fkcrit


def main():
    spec = fkcrit.BoundarySpec.periodic(4, "1/2")
    assert spec.kind == "periodic" and spec.alpha == "1/2" and spec.segments == 4
    assert spec.classify(0.1) == "conducting"
    assert spec.classify(0.5 * math.pi / 4 + math.pi / 4) == "insulated"

    disk = fkcrit.BoundarySpec.full_dirichlet()
    grid = fkcrit.PolarGrid(64, disk)
    b = 0.14589803375031546
    lam_sq, exact = fkcrit.classical_solution(b, grid.rho)
    u = fkcrit.newton_solve(grid, math.sqrt(lam_sq))
    err = max(abs(u.at(i, 0) - exact[i]) for i in range(grid.n_r))
    assert err < 2e-3, err
    assert u.residual_norm() < 1e-8

    trace = fkcrit.trace_branch(grid)
    fold = trace.fit_fold()
    assert abs(fold["lambda_cr_sq"] - 2.0) < 5e-3, fold
    assert trace.termination == "fold-proximity"
    assert all(a < b for a, b in zip(trace.lambdas, trace.lambdas[1:]))

    est = fkcrit.extrapolate_in_n(disk, [64, 128, 256])
    assert abs(est["extrapolated_lambda_cr_sq"] - 2.0) < 0.01, est

    core = trace.final_field.analyze_core()
    assert core["ring"] == grid.n_r - 1

    fit = fkcrit.fit_scaling_law([1 / 32, 1 / 64, 1 / 128, 1 / 512], [2.03 * a**0.1 for a in [1 / 32, 1 / 64, 1 / 128, 1 / 512]], 32)
    assert abs(fit["S"] - 2.03) < 1e-9 and abs(fit["t"] - 0.1) < 1e-9

    r, v = fkcrit.solve_radial(1.0)
    assert len(r) == 4096 and v[0] > v[-1] > 0

    try:
        fkcrit.BoundarySpec.periodic(4, "3/2")
    except ValueError:
        pass
    else:
        raise AssertionError("alpha > 1 accepted")

    print("fkcrit smoke test passed: lambda_cr^2 = %.6f" % est["extrapolated_lambda_cr_sq"])


if __name__ == "__main__":
    main()
