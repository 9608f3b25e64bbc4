"""Closed-form limits for the built-in processes.

Keys match EstimateReport labels (1-based margins); multiplicity limits are
keyed ``multiplicity[y1;y2]`` and marginal cluster-size limits
``cluster_size_<j>[k]``.
"""

import math

from .levels import limiting_rates
from .process import ProcessSpec


def _ex61(tau_prime) -> dict:
    # One innovation above both levels drives margin 2 at t-2 and margin 1 at
    # t-1 and t+1, so such a cluster carries three union upcrossings.
    a, b = tau_prime
    nu1, nu2 = 2 * a, b
    tau1, tau2 = 3 * a, b
    clusters = max(a, b)
    eta = clusters / (nu1 + nu2)
    return {
        "eta_runs": eta,
        "eta_blocks": eta,
        "eta_empty": eta,
        "eta_combined": (nu1 / 2 + nu2) / (nu1 + nu2),
        "eta_marginal_1": 0.5,
        "eta_marginal_2": 1.0,
        "theta_direct": clusters / (tau1 + tau2),
        "theta_from_eta": clusters / (tau1 + tau2),
        "theta_marginal_1": 1 / 3,
        "theta_marginal_2": 1.0,
        "phi_hat": math.exp(-(nu1 + nu2)),
        "alpha_empty": clusters,
        "alpha_blocks": clusters,
        "multiplicity[2;1]": min(a, b) / clusters,
        "multiplicity[2;0]": max(a - b, 0.0) / clusters,
        "multiplicity[0;1]": max(b - a, 0.0) / clusters,
        "cluster_size_1[2]": 1.0,
        "cluster_size_2[1]": 1.0,
        "mean_cluster_size": 1 / eta,
    }


def _ex62(tau_prime) -> dict:
    a, b = tau_prime
    nu1, nu2 = 2 * a, b
    if 2 * nu2 >= nu1:
        eta = nu2 / (nu1 / 2 + nu2)
        phi = math.exp(-(nu1 / 2 + nu2))
        multiplicity = {
            "multiplicity[2;0]": 0.0,
            "multiplicity[0;1]": (nu2 - nu1 / 2) / nu2,
            "multiplicity[2;1]": (nu1 / 2) / nu2,
        }
    else:
        eta = 0.5
        phi = math.exp(-nu1)
        multiplicity = {
            "multiplicity[2;0]": (nu1 / 2 - nu2) / (nu1 / 2),
            "multiplicity[0;1]": 0.0,
            "multiplicity[2;1]": nu2 / (nu1 / 2),
        }
    clusters = -math.log(phi) * eta
    theta = max(a, b) / (2 * a + max(a, b))
    return {
        "eta_runs": eta,
        "eta_blocks": eta,
        "eta_empty": eta,
        "eta_combined": (nu1 / 2 + nu2) / (nu1 + nu2),
        "eta_marginal_1": 0.5,
        "eta_marginal_2": 1.0,
        "theta_direct": theta,
        "theta_from_eta": theta,
        "theta_marginal_1": 1 / 3,
        "theta_marginal_2": 1.0,
        "phi_hat": phi,
        "alpha_empty": clusters,
        "alpha_blocks": clusters,
        **multiplicity,
        "cluster_size_1[2]": 1.0,
        "cluster_size_2[1]": 1.0,
        "mean_cluster_size": 1 / eta,
    }


def _iid(tau_prime) -> dict:
    rate = max(tau_prime)
    targets = {
        "eta_runs": 1.0,
        "eta_blocks": 1.0,
        "eta_empty": 1.0,
        "theta_direct": 1.0,
        "theta_from_eta": 1.0,
        "phi_hat": math.exp(-rate),
        "alpha_empty": rate,
        "alpha_blocks": rate,
        "mean_cluster_size": 1.0,
    }
    for j in range(len(tau_prime)):
        targets[f"eta_marginal_{j + 1}"] = 1.0
        targets[f"theta_marginal_{j + 1}"] = 1.0
        targets[f"cluster_size_{j + 1}[1]"] = 1.0
    if len(tau_prime) == 1:
        targets["eta_combined"] = 1.0
        targets["multiplicity[1]"] = 1.0
    return targets


def closed_form_targets(spec: ProcessSpec, tau_prime) -> dict[str, float]:
    """Limits of every reported quantity for built-in lag structures; empty otherwise."""
    kind = spec.builtin_kind
    if kind is None:
        return {}
    if kind == "ex61":
        targets = _ex61(tau_prime)
    elif kind == "ex62":
        targets = _ex62(tau_prime)
    else:
        targets = _iid(tau_prime)

    rates = limiting_rates(spec, tau_prime)
    for j in range(spec.d):
        targets[f"nu_hat_{j + 1}"] = rates.nu[j]
        targets[f"tau_hat_{j + 1}"] = rates.tau[j]
        if f"eta_marginal_{j + 1}" in targets:
            targets[f"theta_from_eta_marginal_{j + 1}"] = targets[f"eta_marginal_{j + 1}"] * rates.nu[j] / rates.tau[j]
    targets["nu_union_hat"] = rates.nu_union
    targets["tau_union_hat"] = rates.tau_union
    targets["psi_hat"] = math.exp(-rates.tau_union)
    return targets
