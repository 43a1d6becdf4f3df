"""Executable verification of the loss-kernel identities.

Each check runs the analytic implementation against an independent
computation (central finite differences, direct construction, or exact
closed forms) on seeded random cases and reports the worst deviation.
The CLI ``check`` subcommand prints one line per identity and fails the
process if any identity is violated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import losses
from .corruption import (
    build_asymmetric_matrix,
    build_joint_matrix,
    build_symmetric_matrix,
)

CHECK_SEED = 20240913


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    max_error: float
    tolerance: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        msg = f"{status} {self.name}: max error {self.max_error:.3e} (tolerance {self.tolerance:.0e})"
        if self.detail and not self.passed:
            msg += f" -- {self.detail}"
        return msg


def _central_difference(fn, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    grad = np.zeros_like(x, dtype=np.float64)
    flat = grad.reshape(-1)
    xf = x.reshape(-1)
    for i in range(xf.size):
        orig = xf[i]
        xf[i] = orig + h
        up = fn(x)
        xf[i] = orig - h
        down = fn(x)
        xf[i] = orig
        flat[i] = (up - down) / (2.0 * h)
    return grad


def check_ce_gradient(n_cases: int = 100) -> CheckResult:
    """Analytic cross-entropy gradient vs central finite differences."""
    rng = np.random.default_rng(CHECK_SEED)
    tol = 1e-6
    worst = 0.0
    detail = ""
    for case in range(n_cases):
        c = int(rng.integers(2, 11))
        z = rng.normal(scale=2.0, size=(1, c))
        p = rng.dirichlet(np.ones(c))[None, :]
        _, grad = losses.ce_loss_and_grad(z, p)
        fd = _central_difference(lambda zz: losses.ce_loss_and_grad(zz, p)[0], z.copy())
        err = float(np.abs(grad - fd).max())
        if err > worst:
            worst = err
            detail = f"case {case}: z={z.round(4).tolist()} p={p.round(4).tolist()}"
    return CheckResult("ce-gradient-vs-finite-differences", worst < tol, worst, tol, detail)


def check_mixed_target_equivalence(n_cases: int = 100) -> CheckResult:
    """Combined CE+KL logit gradient vs plain CE against the blended target."""
    rng = np.random.default_rng(CHECK_SEED + 1)
    grad_tol = 1e-12
    offset_tol = 1e-10
    worst_grad = 0.0
    worst_offset = 0.0
    detail = ""
    for case in range(n_cases):
        c = int(rng.integers(2, 11))
        b = int(rng.integers(1, 9))
        z = rng.normal(scale=2.0, size=(b, c))
        p_t = rng.dirichlet(np.ones(c), size=b)
        onehot = losses.one_hot(rng.integers(0, c, size=b), c)
        for a in (0.0, 0.25, 0.5, 0.75, 1.0):
            loss_comb, grad_comb, _ = losses.combined_loss(z, onehot, p_t, a, base="ce")
            p_m = losses.mixed_target(onehot, p_t, a)
            loss_mix, grad_mix = losses.ce_loss_and_grad(z, p_m)
            grad_err = float(np.abs(grad_comb - grad_mix).max())
            expected_offset = (1.0 - a) * float(losses.entropy_rows(p_t).mean())
            offset_err = abs((loss_mix - loss_comb) - expected_offset)
            if grad_err > worst_grad or offset_err > worst_offset:
                detail = f"case {case}, a={a}: grad err {grad_err:.3e}, offset err {offset_err:.3e}"
            worst_grad = max(worst_grad, grad_err)
            worst_offset = max(worst_offset, offset_err)
    passed = worst_grad < grad_tol and worst_offset < offset_tol
    return CheckResult(
        "mixed-target-gradient-equivalence", passed, worst_grad, grad_tol, detail,
    )


def check_margin_sign(n_trials: int = 1000, n_classes: int = 10,
                      imbalance_factor: float = 100.0) -> CheckResult:
    """Margin-induced gradient gaps: negative for the rarest class, positive for the most common."""
    rng = np.random.default_rng(CHECK_SEED + 2)
    decay = imbalance_factor ** (-np.arange(n_classes) / (n_classes - 1))
    pi = decay / decay.sum()
    margins = -np.log(pi)
    violations = 0
    detail = ""
    for trial in range(n_trials):
        z = rng.normal(scale=3.0, size=(1, n_classes))
        d_g = losses.la_gradient_difference(z, margins)[0]
        if not (d_g[-1] < 0.0 and d_g[0] > 0.0):
            violations += 1
            if not detail:
                detail = f"trial {trial}: z={z.round(4).tolist()} d_g={d_g.round(6).tolist()}"
    return CheckResult("margin-sign-property", violations == 0, float(violations), 1.0, detail)


def check_kl_properties(n_cases: int = 200) -> CheckResult:
    """KL is nonnegative and vanishes exactly on identical distributions."""
    rng = np.random.default_rng(CHECK_SEED + 3)
    tol = 1e-10
    worst = 0.0
    detail = ""
    for case in range(n_cases):
        c = int(rng.integers(2, 11))
        z = rng.normal(scale=2.0, size=(1, c))
        p_t = rng.dirichlet(np.ones(c))[None, :]
        kl, _, _ = losses.kl_teacher_loss_and_grad(z, p_t)
        negativity = max(0.0, -kl)
        if negativity > worst:
            worst = negativity
            detail = f"case {case}: negative KL {kl:.3e}"
        q = losses.softmax(z)
        kl_same, grad_same, _ = losses.kl_teacher_loss_and_grad(z, q)
        err = max(abs(kl_same), float(np.abs(grad_same).max()))
        if err > worst:
            worst = err
            detail = f"case {case}: KL(q||q)={kl_same:.3e}"
    return CheckResult("kl-nonnegative-and-zero-at-equality", worst < tol, worst, tol, detail)


def check_temperature_gradient(n_cases: int = 100) -> CheckResult:
    """Analytic log-temperature gradient vs finite differences through the tempered softmax."""
    rng = np.random.default_rng(CHECK_SEED + 4)
    tol = 1e-6
    worst = 0.0
    detail = ""
    for case in range(n_cases):
        c = int(rng.integers(2, 11))
        b = int(rng.integers(1, 9))
        sims = rng.uniform(-1.0, 1.0, size=(b, c))
        z = rng.normal(scale=2.0, size=(b, c))
        rho = float(rng.uniform(-1.5, 1.5))

        def kl_at(rho_val):
            probs = losses.softmax(sims / np.exp(rho_val))
            return losses.kl_teacher_loss_and_grad(z, probs)[0]

        _, _, grad_temp = losses.kl_teacher_loss_and_grad(z, losses.softmax(sims / np.exp(rho)))
        h = 1e-6
        fd = (kl_at(rho + h) - kl_at(rho - h)) / (2.0 * h)
        err = abs(grad_temp - fd)
        if err > worst:
            worst = err
            detail = f"case {case}: rho={rho:.4f} analytic={grad_temp:.6e} fd={fd:.6e}"
    return CheckResult("temperature-gradient-vs-finite-differences", worst < tol, worst, tol, detail)


def check_transition_rows(n_cases: int = 50) -> CheckResult:
    """All three noise constructors produce exactly row-stochastic matrices."""
    rng = np.random.default_rng(CHECK_SEED + 5)
    tol = 1e-12
    worst = 0.0
    detail = ""
    for case in range(n_cases):
        c = int(rng.integers(2, 11))
        gamma = float(rng.uniform(0.0, 0.95))
        counts = rng.integers(1, 500, size=c)
        for matrix in (
            build_joint_matrix(counts, gamma),
            build_symmetric_matrix(c, gamma),
            build_asymmetric_matrix(c, gamma),
        ):
            err = float(np.abs(matrix.rows.sum(axis=1) - 1.0).max())
            bounds = float(max(-matrix.rows.min(), matrix.rows.max() - 1.0, 0.0))
            err = max(err, bounds)
            if err > worst:
                worst = err
                detail = f"case {case}: kind={matrix.kind} C={c} gamma={gamma:.3f}"
    return CheckResult("transition-matrix-row-stochastic", worst < tol, worst, tol, detail)


def run_all_checks() -> list[CheckResult]:
    return [
        check_ce_gradient(),
        check_mixed_target_equivalence(),
        check_margin_sign(),
        check_kl_properties(),
        check_temperature_gradient(),
        check_transition_rows(),
    ]
