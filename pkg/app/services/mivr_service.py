"""
Modelo de rebalanceo con matching integrado (MIVR), determinista y robusto.

Convención por defecto ("customer_first"): y[i, j, k] son clientes de la región i
atendidos por vehículos de la región j. La demanda se suma sobre el índice del
vehículo y la oferta sobre el del cliente. "paper_verbatim" mantiene la
orientación original de las restricciones de demanda.
"""
import itertools
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd

from app.exceptions import InfeasibleSetError, InstanceTooLarge, InvariantViolation
from app.schemas.plan import MivrInstance, RebalancePlan
from app.schemas.uncertainty import UncertaintySet
from app.services.lp_solver import OPTIMAL, LinearProgram, LPSolution, solve_lp
from app.services.network_service import match_feasibility, rebalance_feasibility
from app.services.uncertainty_service import worst_case_min_matrix, worst_case_sum_max_vector
from app.utils.logger import get_logger

logger = get_logger(__name__)

SNAP_TOL = 1e-7
ORACLE_MAX_ZONES = 4
ORACLE_MAX_INTERVALS = 2
ORACLE_MAX_VERTICES = 64


@dataclass
class MivrIndex:
    """Columnas de cada familia de variables: x, y (n, n, κ); S, V, O, T (n, κ)"""
    x: np.ndarray
    y: np.ndarray
    S: np.ndarray
    V: np.ndarray
    O: np.ndarray
    T: Optional[np.ndarray] = None


def _skeleton(inst: MivrInstance, name: str) -> Tuple[LinearProgram, MivrIndex]:
    '''
    Variables y restricciones comunes: factibilidad de rebalanceo y matching como
    cotas fijas en cero, oferta, capacidad y balance, y las
    recursiones de vehículos libres y ocupados.
    '''
    n, K = inst.n, inst.kappa
    a = rebalance_feasibility(inst.net, inst.grid)
    b = match_feasibility(inst.net, inst.grid)
    d = inst.net.dist / inst.distance_unit_m
    P, Q = inst.transitions.P, inst.transitions.Q

    lp = LinearProgram(name)
    x = np.empty((n, n, K), dtype=np.int64)
    y = np.empty((n, n, K), dtype=np.int64)
    S = np.empty((n, K), dtype=np.int64)
    V = np.empty((n, K), dtype=np.int64)
    O = np.empty((n, K), dtype=np.int64)

    for k in range(K):
        for i in range(n):
            for j in range(n):
                x[i, j, k] = lp.add_variable(f"x_{i}_{j}_{k}", cost=d[i, j])
                if a[i, j] or i == j:
                    lp.fix(x[i, j, k])
                # vehículo en j recoge en i: la distancia de recogida es d[j, i]
                y[i, j, k] = lp.add_variable(f"y_{i}_{j}_{k}", cost=inst.beta * d[j, i])
                if b[i, j]:
                    lp.fix(y[i, j, k])
        for i in range(n):
            S[i, k] = lp.add_variable(f"S_{i}_{k}")
            V[i, k] = lp.add_variable(f"V_{i}_{k}")
            O[i, k] = lp.add_variable(f"O_{i}_{k}")

    for i in range(n):
        lp.fix(V[i, 0], inst.V0[i])
        lp.fix(O[i, 0], inst.O0[i])

    unos = np.ones(n)
    for k in range(K):
        for i in range(n):
            # lo que sale de i no supera lo disponible
            lp.add_constraint(np.append(x[i, :, k], V[i, k]), np.append(unos, -1.0), "<=", 0.0, f"cap_{i}_{k}")
            # S = V + entradas − salidas
            cols = np.concatenate([[S[i, k], V[i, k]], x[:, i, k], x[i, :, k]])
            coefs = np.concatenate([[1.0, -1.0], -unos, unos])
            lp.add_constraint(cols, coefs, "=", 0.0, f"bal_{i}_{k}")
            # vehículos de i usados en el matching ≤ S
            lp.add_constraint(np.append(y[:, i, k], S[i, k]), np.append(unos, -1.0), "<=", 0.0, f"sup_{i}_{k}")

        if k + 1 < K:
            for i in range(n):
                # V' = S − vehículos de i que recogen + ocupados que quedan libres en i
                cols = np.concatenate([[V[i, k + 1], S[i, k]], y[:, i, k], O[:, k]])
                coefs = np.concatenate([[1.0, -1.0], unos, -Q[:, i]])
                lp.add_constraint(cols, coefs, "=", 0.0, f"vac_{i}_{k}")
                # O' = ocupados que siguen en ruta hacia i + recogidas en i
                cols = np.concatenate([[O[i, k + 1]], O[:, k], y[i, :, k]])
                coefs = np.concatenate([[1.0], -P[:, i], -unos])
                lp.add_constraint(cols, coefs, "=", 0.0, f"occ_{i}_{k}")

    return lp, MivrIndex(x=x, y=y, S=S, V=V, O=O)


def _demand_rows(lp: LinearProgram, idx: MivrIndex, bound: np.ndarray, convention: str, tag: str) -> None:
    n, K = bound.shape
    unos = np.ones(n)
    for k in range(K):
        for i in range(n):
            if convention == "customer_first":
                lp.add_constraint(idx.y[i, :, k], unos, "<=", bound[i, k], f"{tag}_{i}_{k}")
            else:
                lp.add_constraint(idx.y[:, i, k], unos, "<=", bound[i, k], f"{tag}_{i}_{k}")


def build_deterministic(inst: MivrInstance, demand: Optional[np.ndarray] = None) -> Tuple[LinearProgram, MivrIndex]:
    '''
    Modelo con demanda puntual r̂ (n, κ). Agrega el tope de demanda, la demanda no atendida
    T = r̂ − Σ_j y_ij ≥ 0 y su penalidad γ en el objetivo.
    '''
    r = inst.demand if demand is None else np.asarray(demand, dtype=float)
    if r is None or r.shape != (inst.n, inst.kappa):
        raise InvariantViolation("La demanda puntual debe ser (n, κ)")
    lp, idx = _skeleton(inst, "mivr_deterministic")
    n, K = r.shape
    T = np.empty((n, K), dtype=np.int64)
    unos = np.ones(n)
    for k in range(K):
        for i in range(n):
            T[i, k] = lp.add_variable(f"T_{i}_{k}", cost=inst.gamma)
    _demand_rows(lp, idx, r, inst.demand_convention, "dem")
    for k in range(K):
        for i in range(n):
            lp.add_constraint(np.append(idx.y[i, :, k], T[i, k]), np.append(unos, 1.0), "=", r[i, k], f"uns_{i}_{k}")
    idx.T = T
    return lp, idx


def build_robust(inst: MivrInstance, uncertainty: Optional[UncertaintySet] = None) -> Tuple[LinearProgram, MivrIndex]:
    '''
    Contraparte robusta estática: el tope de demanda contra el mínimo de peor caso de cada celda
    y la penalidad γ contra la máxima demanda total de cada intervalo. Esa
    constante queda en objective_offset para reportar valores de peor caso.
    '''
    s = inst.uncertainty if uncertainty is None else uncertainty
    if s is None:
        raise InvariantViolation("El modelo robusto necesita un conjunto de incertidumbre")
    if s.lb.shape != (inst.n, inst.kappa):
        raise InvariantViolation("El conjunto de incertidumbre debe ser (n, κ)")
    minimos = worst_case_min_matrix(s)
    suma_max = worst_case_sum_max_vector(s)

    lp, idx = _skeleton(inst, "mivr_robust")
    for col in idx.y.ravel():
        lp.cost[col] -= inst.gamma
    lp.objective_offset = inst.gamma * float(suma_max.sum())

    _demand_rows(lp, idx, minimos, inst.demand_convention, "dem")
    if inst.demand_convention == "paper_verbatim":
        _demand_rows(lp, idx, minimos, "customer_first", "cus")
    return lp, idx


def extract_plan(solution: LPSolution, idx: MivrIndex, inst: MivrInstance) -> RebalancePlan:
    '''
    Toma x del primer intervalo y la redondea por origen con restos mayores:
    cada fila suma min(⌊V_i⌋, round(Σ_j x_ij)); los empates van al destino de menor índice.
    '''
    if solution.status != OPTIMAL:
        raise InvariantViolation(f"No se puede extraer un plan de una solución {solution.status}")
    n = inst.n
    flujo = solution.x[idx.x[:, :, 0]]
    cercanos = np.abs(flujo - np.round(flujo)) <= SNAP_TOL
    flujo = np.where(cercanos, np.round(flujo), flujo)
    flujo = np.maximum(flujo, 0.0)

    x = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        fila = flujo[i]
        objetivo = int(min(np.floor(inst.V0[i] + SNAP_TOL), np.floor(fila.sum() + 0.5)))
        base = np.floor(fila).astype(np.int64)
        while base.sum() > objetivo:
            base[np.flatnonzero(base > 0)[-1]] -= 1
        faltan = objetivo - int(base.sum())
        if faltan > 0:
            restos = fila - np.floor(fila)
            orden = sorted(range(n), key=lambda j: (-restos[j], j))
            for j in orden[:faltan]:
                base[j] += 1
        x[i] = base

    y = solution.x[idx.y]
    return RebalancePlan(x=x, y_planned=y, objective=solution.objective, status=solution.status)


def solve_deterministic(inst: MivrInstance, demand=None, tolerance: float = 1e-7, backend: str = "simplex") -> RebalancePlan:
    lp, idx = build_deterministic(inst, demand)
    solucion = solve_lp(lp, tolerance=tolerance, backend=backend)
    if solucion.status != OPTIMAL:
        logger.warning("Modelo determinista %s, se usa un plan vacío", solucion.status)
        return RebalancePlan.empty(inst.n, status=solucion.status)
    return extract_plan(solucion, idx, inst)


def solve_robust_with_fallback(
    inst: MivrInstance,
    uncertainty: Optional[UncertaintySet] = None,
    tolerance: float = 1e-7,
    backend: str = "simplex",
) -> Tuple[RebalancePlan, bool]:
    '''
    Resuelve el modelo robusto; si el conjunto es vacío o el LP es infactible,
    resuelve el determinista sobre μ. Devuelve (plan, hubo_respaldo).
    '''
    s = inst.uncertainty if uncertainty is None else uncertainty
    try:
        lp, idx = build_robust(inst, s)
        solucion = solve_lp(lp, tolerance=tolerance, backend=backend)
        if solucion.status == OPTIMAL:
            return extract_plan(solucion, idx, inst), False
        motivo = f"modelo robusto {solucion.status}"
    except InfeasibleSetError as e:
        motivo = e.detail

    logger.warning("Respaldo determinista sobre μ: %s", motivo)
    plan = solve_deterministic(inst, demand=s.mu, tolerance=tolerance, backend=backend)
    plan.fallback = True
    return plan, True


# --- oráculo min-max ---

def set_vertices(lb: np.ndarray, mu: np.ndarray, ub: np.ndarray, budget: float) -> np.ndarray:
    '''
    Vértices de {lb ≤ r ≤ ub, |Σ(r − μ)| ≤ Γ}: vértices de la caja que cumplen el
    presupuesto y puntos con n−1 coordenadas en sus cotas y el presupuesto activo.
    '''
    n = len(lb)
    bajo, alto = mu.sum() - budget, mu.sum() + budget
    tol = 1e-9
    vertices: List[np.ndarray] = []
    for elegidos in itertools.product((0, 1), repeat=n):
        r = np.where(np.array(elegidos) == 1, ub, lb)
        if bajo - tol <= r.sum() <= alto + tol:
            vertices.append(r)
    for libre in range(n):
        otros = [j for j in range(n) if j != libre]
        for elegidos in itertools.product((0, 1), repeat=n - 1):
            r = np.zeros(n)
            for j, e in zip(otros, elegidos):
                r[j] = ub[j] if e else lb[j]
            for total in (bajo, alto):
                r[libre] = total - r[otros].sum()
                if lb[libre] - tol <= r[libre] <= ub[libre] + tol:
                    vertices.append(r.copy())
    if not vertices:
        return np.zeros((0, n))
    return np.unique(np.round(np.array(vertices), 12), axis=0)


def minmax_oracle(inst: MivrInstance, uncertainty: Optional[UncertaintySet] = None) -> float:
    '''
    min sobre (x, y) del máximo sobre los vértices del conjunto del objetivo
    robusto, con el tope de demanda exigido en cada vértice. Epígrafe por intervalo, resuelto con HiGHS.
    Solo para instancias pequeñas.
    '''
    s = inst.uncertainty if uncertainty is None else uncertainty
    n, K = inst.n, inst.kappa
    if n > ORACLE_MAX_ZONES or K > ORACLE_MAX_INTERVALS:
        raise InstanceTooLarge(f"El oráculo acepta n ≤ {ORACLE_MAX_ZONES} y κ ≤ {ORACLE_MAX_INTERVALS}")

    vertices_k = []
    for k in range(K):
        vertices = set_vertices(s.lb[:, k], s.mu[:, k], s.ub[:, k], s.budget)
        if len(vertices) == 0:
            raise InfeasibleSetError(f"Conjunto vacío en el intervalo {k}")
        if len(vertices) > ORACLE_MAX_VERTICES:
            raise InstanceTooLarge(f"{len(vertices)} vértices en el intervalo {k}")
        vertices_k.append(vertices)

    lp, idx = _skeleton(inst, "mivr_minmax")
    unos = np.ones(n)
    for k in range(K):
        t = lp.add_variable(f"t_{k}", lb=-np.inf, cost=1.0)
        y_k = idx.y[:, :, k].ravel()
        for v_id, v in enumerate(vertices_k[k]):
            # t_k ≥ γ (Σ v − Σ y)
            lp.add_constraint(
                np.append(y_k, t), np.append(np.full(y_k.size, inst.gamma), 1.0), ">=",
                inst.gamma * v.sum(), f"epi_{k}_{v_id}",
            )
            for i in range(n):
                if inst.demand_convention == "customer_first":
                    lp.add_constraint(idx.y[i, :, k], unos, "<=", v[i], f"dem_{i}_{k}_{v_id}")
                else:
                    lp.add_constraint(idx.y[:, i, k], unos, "<=", v[i], f"dem_{i}_{k}_{v_id}")
                    lp.add_constraint(idx.y[i, :, k], unos, "<=", v[i], f"cus_{i}_{k}_{v_id}")

    solucion = solve_lp(lp, backend="highs")
    if solucion.status != OPTIMAL:
        raise InfeasibleSetError(f"Oráculo min-max {solucion.status}")
    return float(solucion.objective)


def write_plan_csv(plan: RebalancePlan, path: Path, zone_ids=None) -> None:
    ids = list(range(plan.x.shape[0])) if zone_ids is None else list(zone_ids)
    filas = [{"k": k, "i": ids[i], "j": ids[j], "x": x} for k, i, j, x in plan.moves()]
    pd.DataFrame(filas, columns=["k", "i", "j", "x"]).to_csv(path, index=False)
