"""Quick check that the extension module loads and agrees with known values."""

import json
import math

import weylab_py as w


def close(a, b, tol):
    return abs(a - b) <= tol


def main():
    flat = w.Geometry.flat(3)
    space = w.BundleSpace(flat)
    x, psi = [0.1, -0.2, 0.05], [0.3, 0.1, -0.2]
    lam, res = space.einstein(x, psi)
    assert close(lam, -4.0, 1e-9) and res < 1e-6, (lam, res)
    assert space.closedness(x, psi) < 1e-9
    assert len(space.h(x, psi)) == 6

    klein = w.Geometry.klein_ball(2)
    x = [0.2, -0.1]
    rho, g = klein.rho(x), klein.metric(x)
    assert all(close(rho[i][j], g[i][j], 1e-9) for i in range(2) for j in range(2))

    density = "(1 - x1^2 - x2^2)^(1/2)"
    pts = klein.sample_points(5, 3)
    samples = w.monge_ampere(klein, density, 1.0, pts)
    assert max(abs(s["residual"]) for s in samples) < 1e-9
    cert = w.certificate(klein, density, pts)
    assert cert["is_ma_solution"] and cert["rho_positive_definite"]

    section = w.WeylSection.from_density(klein, density, pts)
    assert max(abs(v) for v in section.residuals(pts[0])["minimal"]) < 1e-9

    try:
        w.WeylSection(flat).residuals([0.0, 0.0, 0.0])
    except w.NumericalError:
        pass
    else:
        raise AssertionError("degenerate section did not raise")

    scenario = json.loads(w.acceptance_scenarios(7)[0])
    report = json.loads(w.run_scenario(json.dumps(scenario), points=4))
    assert report["pass"], report
    assert not math.isnan(report["wall_time_s"])
    print("smoke test ok:", len(report["checks"]), "checks in", scenario["id"])


if __name__ == "__main__":
    main()
