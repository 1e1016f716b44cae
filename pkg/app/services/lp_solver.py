"""
Programación lineal: constructor de modelos y simplex revisado de dos fases.

El simplex mantiene la inversa de la base explícita con actualizaciones eta y
refactoriza cada cierto número de pivotes. Usa la regla de Dantzig y cambia a la
de Bland tras una racha de pivotes degenerados.
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from app.exceptions import InvariantViolation, NumericalFailure
from app.utils.logger import get_logger

logger = get_logger(__name__)

SENSES = ("<=", ">=", "=")

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class LinearProgram:
    '''
    Modelo de minimización: catálogo de variables con cotas, costos y filas
    (coeficientes, sentido, lado derecho). objective_offset es una constante
    que se suma al objetivo reportado.
    '''

    def __init__(self, name: str = "lp"):
        self.name = name
        self.names: List[str] = []
        self.index: Dict[str, int] = {}
        self.lb: List[float] = []
        self.ub: List[float] = []
        self.cost: List[float] = []
        self.rows: List[tuple] = []
        self.row_names: List[str] = []
        self.objective_offset = 0.0

    @property
    def n_vars(self) -> int:
        return len(self.names)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def add_variable(self, name: str, lb: float = 0.0, ub: float = np.inf, cost: float = 0.0) -> int:
        if name in self.index:
            raise InvariantViolation(f"Variable repetida: {name}")
        if lb > ub:
            raise InvariantViolation(f"Cotas inválidas para {name}: {lb} > {ub}")
        self.index[name] = len(self.names)
        self.names.append(name)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.cost.append(float(cost))
        return self.index[name]

    def add_constraint(self, cols: Sequence[int], coefs: Sequence[float], sense: str, rhs: float, name: str = None) -> int:
        cols = np.asarray(cols, dtype=np.int64)
        coefs = np.asarray(coefs, dtype=float)
        if sense not in SENSES:
            raise InvariantViolation(f"Sentido desconocido: {sense}")
        if cols.shape != coefs.shape:
            raise InvariantViolation("Columnas y coeficientes con largos distintos")
        if cols.size and (cols.min() < 0 or cols.max() >= self.n_vars):
            raise InvariantViolation("La fila referencia columnas inexistentes")
        self.rows.append((cols, coefs, sense, float(rhs)))
        self.row_names.append(name or f"c{len(self.rows) - 1}")
        return len(self.rows) - 1

    def fix(self, col: int, value: float = 0.0) -> None:
        self.lb[col] = self.ub[col] = float(value)

    def matrix(self) -> sparse.csr_matrix:
        filas, columnas, valores = [], [], []
        for r, (cols, coefs, _, _) in enumerate(self.rows):
            filas.append(np.full(cols.size, r))
            columnas.append(cols)
            valores.append(coefs)
        if not filas:
            return sparse.csr_matrix((0, self.n_vars))
        return sparse.csr_matrix(
            (np.concatenate(valores), (np.concatenate(filas), np.concatenate(columnas))),
            shape=(self.n_rows, self.n_vars),
        )

    @property
    def senses(self) -> np.ndarray:
        return np.array([r[2] for r in self.rows], dtype=object)

    @property
    def rhs(self) -> np.ndarray:
        return np.array([r[3] for r in self.rows], dtype=float)


@dataclass
class LPSolution:
    status: str
    x: Optional[np.ndarray] = None
    objective: Optional[float] = None
    iterations: int = 0
    max_residual: float = 0.0
    names: List[str] = field(default_factory=list)

    def value(self, name: str) -> float:
        return float(self.x[self.names.index(name)])


def residuals(lp: LinearProgram, x: np.ndarray) -> np.ndarray:
    """Violación de cada fila y de cada cota (0 si se cumple)"""
    Ax = lp.matrix() @ x if lp.n_rows else np.zeros(0)
    b = lp.rhs
    viol = np.zeros(lp.n_rows)
    for r, sentido in enumerate(lp.senses):
        if sentido == "<=":
            viol[r] = max(0.0, Ax[r] - b[r])
        elif sentido == ">=":
            viol[r] = max(0.0, b[r] - Ax[r])
        else:
            viol[r] = abs(Ax[r] - b[r])
    cotas = np.maximum(np.asarray(lp.lb) - x, 0.0) + np.maximum(x - np.asarray(lp.ub), 0.0)
    return np.concatenate([viol, cotas])


# --- forma estándar ---

@dataclass
class _StandardForm:
    A: sparse.csc_matrix
    b: np.ndarray
    c: np.ndarray
    n_struct: int
    initial_basis: np.ndarray
    artificial: np.ndarray
    recover: callable
    offset: float


def _standard_form(lp: LinearProgram) -> Optional[_StandardForm]:
    '''
    Presolve + forma estándar min c'z, Az = b, z ≥ 0, b ≥ 0.
    Devuelve None si una fila vacía tras el presolve resulta infactible.
    '''
    lb = np.asarray(lp.lb, dtype=float)
    ub = np.asarray(lp.ub, dtype=float)
    c = np.asarray(lp.cost, dtype=float)
    A = lp.matrix().tocsc()
    b = lp.rhs.copy()
    sentidos = lp.senses

    fijas = lb == ub
    valor_fijo = np.where(fijas, lb, 0.0)
    b = b - A @ valor_fijo
    offset = float(c @ valor_fijo)

    libres = np.flatnonzero(~fijas)
    A = A[:, libres]
    lb_l, ub_l, c_l = lb[libres], ub[libres], c[libres]

    # filas vacías
    no_vacias = np.diff(A.tocsr().indptr) > 0
    for r in np.flatnonzero(~no_vacias):
        s, v = sentidos[r], b[r]
        if (s == "<=" and v < -1e-9) or (s == ">=" and v > 1e-9) or (s == "=" and abs(v) > 1e-9):
            return None
    A = A.tocsr()[no_vacias]
    b = b[no_vacias]
    sentidos = sentidos[no_vacias]

    # desplazar cotas inferiores; dividir libres en parte positiva y negativa
    abajo_finito = np.isfinite(lb_l)
    desplazamiento = np.where(abajo_finito, lb_l, 0.0)
    b = b - A @ desplazamiento
    offset += float(c_l @ desplazamiento)
    negativas = np.flatnonzero(~abajo_finito)
    if negativas.size:
        A = sparse.hstack([A, -A[:, negativas]]).tocsr()
        c_l = np.concatenate([c_l, -c_l[negativas]])

    # filas de cota superior z_j ≤ ub − lb (z⁺ − z⁻ ≤ ub para las libres)
    arriba = np.flatnonzero(np.isfinite(ub_l))
    if arriba.size:
        filas = list(range(arriba.size))
        columnas = list(arriba)
        valores = [1.0] * arriba.size
        for k, j in enumerate(arriba):
            if not abajo_finito[j]:
                filas.append(k)
                columnas.append(libres.size + int(np.searchsorted(negativas, j)))
                valores.append(-1.0)
        filas_ub = sparse.csr_matrix((valores, (filas, columnas)), shape=(arriba.size, A.shape[1]))
        A = sparse.vstack([A, filas_ub]).tocsr()
        b = np.concatenate([b, ub_l[arriba] - desplazamiento[arriba]])
        sentidos = np.concatenate([sentidos, np.array(["<="] * arriba.size, dtype=object)])

    m, n_struct = A.shape
    holgura = np.array([1.0 if s == "<=" else (-1.0 if s == ">=" else 0.0) for s in sentidos])
    con_holgura = np.flatnonzero(holgura != 0)
    H = sparse.csr_matrix(
        (holgura[con_holgura], (con_holgura, np.arange(con_holgura.size))), shape=(m, con_holgura.size)
    )
    signo = np.where(b < 0, -1.0, 1.0)
    D = sparse.diags(signo)
    A_std = (D @ sparse.hstack([A, H])).tocsr()
    b = signo * b

    # base inicial: holguras con +1 tras el cambio de signo; artificiales en el resto
    base = np.full(m, -1, dtype=np.int64)
    for k, r in enumerate(con_holgura):
        if holgura[r] * signo[r] > 0:
            base[r] = n_struct + k
    sin_base = np.flatnonzero(base < 0)
    n_total = n_struct + con_holgura.size
    art = sparse.csr_matrix((np.ones(sin_base.size), (sin_base, np.arange(sin_base.size))), shape=(m, sin_base.size))
    A_std = sparse.hstack([A_std, art]).tocsc()
    base[sin_base] = n_total + np.arange(sin_base.size)
    artificial = np.zeros(A_std.shape[1], dtype=bool)
    artificial[n_total:] = True

    c_std = np.concatenate([c_l, np.zeros(A_std.shape[1] - c_l.size)])
    n_libres = libres.size

    def recover(z: np.ndarray) -> np.ndarray:
        x_l = z[:n_libres] + desplazamiento
        if negativas.size:
            x_l[negativas] -= z[n_libres:n_libres + negativas.size]
        x = valor_fijo.copy()
        x[libres] = x_l
        return x

    return _StandardForm(A_std, b, c_std, n_total, base, artificial, recover, offset)


class _RevisedSimplex:
    def __init__(self, sf: _StandardForm, tol: float, max_iter: int, refactor_every: int = 50, bland_after: int = 50):
        self.A = sf.A
        self.b = sf.b
        self.m, self.n = sf.A.shape
        self.basis = sf.initial_basis.copy()
        self.tol = tol
        self.max_iter = max_iter
        self.refactor_every = refactor_every
        self.bland_after = bland_after
        self.iterations = 0
        self.refactor()

    def column(self, j: int) -> np.ndarray:
        inicio, fin = self.A.indptr[j], self.A.indptr[j + 1]
        col = np.zeros(self.m)
        col[self.A.indices[inicio:fin]] = self.A.data[inicio:fin]
        return col

    def refactor(self) -> None:
        if self.m == 0:
            self.Binv = np.zeros((0, 0))
            self.xB = np.zeros(0)
            return
        try:
            self.Binv = np.linalg.inv(self.A[:, self.basis].toarray())
        except np.linalg.LinAlgError:
            raise NumericalFailure("Base singular al refactorizar", {"iterations": self.iterations})
        self.xB = self.Binv @ self.b
        self.xB[np.abs(self.xB) < self.tol * 1e-3] = 0.0

    def run(self, c: np.ndarray, allowed: np.ndarray, phase: int) -> str:
        racha = 0
        bland = False
        desde_refactor = 0
        while True:
            if self.iterations >= self.max_iter:
                raise NumericalFailure(
                    f"El simplex superó {self.max_iter} iteraciones",
                    {"phase": phase, "iterations": self.iterations, "objective": float(c[self.basis] @ self.xB)},
                )
            y = c[self.basis] @ self.Binv
            d = c - self.A.T @ y
            candidatos = allowed.copy()
            candidatos[self.basis] = False
            mejora = candidatos & (d < -self.tol)
            if not mejora.any():
                return OPTIMAL
            j = int(np.flatnonzero(mejora)[0]) if bland else int(np.argmin(np.where(mejora, d, np.inf)))

            col = self.Binv @ self.column(j)
            positivos = col > self.tol
            if not positivos.any():
                return UNBOUNDED
            razones = np.full(self.m, np.inf)
            razones[positivos] = np.maximum(self.xB[positivos], 0.0) / col[positivos]
            theta = razones.min()
            empatados = np.flatnonzero(razones <= theta + self.tol)
            if bland:
                r = int(empatados[np.argmin(self.basis[empatados])])
            else:
                r = int(empatados[np.argmax(col[empatados])])

            if theta <= self.tol:
                racha += 1
                if racha >= self.bland_after and not bland:
                    logger.debug("Degeneración sostenida, cambiando a la regla de Bland")
                    bland = True
            else:
                racha = 0
                bland = False

            self.xB -= theta * col
            self.xB[r] = theta
            self.basis[r] = j
            pivote = col[r]
            fila = self.Binv[r] / pivote
            self.Binv -= np.outer(col, fila)
            self.Binv[r] = fila
            self.iterations += 1
            desde_refactor += 1
            if desde_refactor >= self.refactor_every:
                self.refactor()
                desde_refactor = 0
            self.xB[np.abs(self.xB) < self.tol * 1e-3] = 0.0

    def drive_out_artificials(self, artificial: np.ndarray) -> None:
        """Saca de la base las artificiales en cero; si la fila es redundante queda en la base"""
        for r in range(self.m):
            if not artificial[self.basis[r]]:
                continue
            fila = self.Binv[r] @ self.A
            fila = np.asarray(fila).ravel()
            fila[artificial] = 0.0
            fila[self.basis] = 0.0
            j = int(np.argmax(np.abs(fila)))
            if abs(fila[j]) <= self.tol:
                continue
            col = self.Binv @ self.column(j)
            self.basis[r] = j
            fila_inv = self.Binv[r] / col[r]
            self.Binv -= np.outer(col, fila_inv)
            self.Binv[r] = fila_inv
            self.iterations += 1
        self.refactor()

    def primal(self) -> np.ndarray:
        z = np.zeros(self.n)
        z[self.basis] = np.maximum(self.xB, 0.0)
        return z


def _solve_simplex(lp: LinearProgram, tolerance: float, max_iter: Optional[int]) -> LPSolution:
    sf = _standard_form(lp)
    if sf is None:
        return LPSolution(status=INFEASIBLE, names=lp.names)
    m, n = sf.A.shape
    max_iter = max_iter or max(1000, 50 * (m + n))
    tol = min(tolerance, 1e-9)
    simplex = _RevisedSimplex(sf, tol=tol, max_iter=max_iter)

    if sf.artificial.any():
        c1 = sf.artificial.astype(float)
        simplex.run(c1, np.ones(n, dtype=bool), phase=1)
        infactibilidad = float(c1[simplex.basis] @ simplex.xB)
        if infactibilidad > tolerance * max(1.0, float(np.abs(sf.b).max(initial=0.0))):
            return LPSolution(status=INFEASIBLE, iterations=simplex.iterations, names=lp.names)
        simplex.drive_out_artificials(sf.artificial)

    estado = simplex.run(sf.c, ~sf.artificial, phase=2)
    if estado == UNBOUNDED:
        return LPSolution(status=UNBOUNDED, iterations=simplex.iterations, names=lp.names)

    x = sf.recover(simplex.primal())
    objetivo = float(np.asarray(lp.cost) @ x) + lp.objective_offset
    return LPSolution(
        status=OPTIMAL,
        x=x,
        objective=objetivo,
        iterations=simplex.iterations,
        max_residual=float(residuals(lp, x).max(initial=0.0)),
        names=lp.names,
    )


def _solve_highs(lp: LinearProgram) -> LPSolution:
    A = lp.matrix()
    sentidos = lp.senses
    b = lp.rhs
    menor = np.array([s == "<=" for s in sentidos], dtype=bool)
    mayor = np.array([s == ">=" for s in sentidos], dtype=bool)
    igual = ~(menor | mayor)
    A_ub = sparse.vstack([A[menor], -A[mayor]]) if (menor.any() or mayor.any()) else None
    b_ub = np.concatenate([b[menor], -b[mayor]]) if A_ub is not None else None
    resultado = linprog(
        np.asarray(lp.cost),
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A[igual] if igual.any() else None,
        b_eq=b[igual] if igual.any() else None,
        bounds=list(zip(np.where(np.isfinite(lp.lb), lp.lb, None), np.where(np.isfinite(lp.ub), lp.ub, None))),
        method="highs",
    )
    if resultado.status == 2:
        return LPSolution(status=INFEASIBLE, names=lp.names)
    if resultado.status == 3:
        return LPSolution(status=UNBOUNDED, names=lp.names)
    if resultado.status != 0:
        raise NumericalFailure(f"HiGHS terminó con estado {resultado.status}: {resultado.message}",
                               {"status": int(resultado.status)})
    x = np.asarray(resultado.x, dtype=float)
    return LPSolution(
        status=OPTIMAL,
        x=x,
        objective=float(resultado.fun) + lp.objective_offset,
        iterations=int(getattr(resultado, "nit", 0)),
        max_residual=float(residuals(lp, x).max(initial=0.0)),
        names=lp.names,
    )


def solve_lp(lp: LinearProgram, tolerance: float = 1e-7, backend: str = "simplex", max_iter: Optional[int] = None) -> LPSolution:
    '''
    Resuelve el modelo. status ∈ {optimal, infeasible, unbounded}.
    Superar el límite de iteraciones lanza NumericalFailure.
    '''
    if backend == "highs":
        solucion = _solve_highs(lp)
    elif backend == "simplex":
        solucion = _solve_simplex(lp, tolerance, max_iter)
    else:
        raise InvariantViolation(f"Backend LP desconocido: {backend}")

    if solucion.status == OPTIMAL and solucion.max_residual > tolerance:
        logger.warning("Residuo %.2e sobre la tolerancia en %s", solucion.max_residual, lp.name)
    return solucion


def _term(coef: float, nombre: str) -> str:
    signo = "-" if coef < 0 else "+"
    return f"{signo} {abs(coef):.12g} {nombre}"


def write_lp(lp: LinearProgram, path: Path) -> None:
    """Exporta en formato de texto LP (CPLEX). El término constante va como comentario."""
    lineas = [f"\\ {lp.name}", f"\\ objective_offset: {lp.objective_offset:.12g}", "Minimize"]
    objetivo = [_term(c, lp.names[j]) for j, c in enumerate(lp.cost) if c != 0]
    lineas.append(" obj: " + (" ".join(objetivo) if objetivo else "0 " + (lp.names[0] if lp.names else "")))
    lineas.append("Subject To")
    for nombre, (cols, coefs, sentido, rhs) in zip(lp.row_names, lp.rows):
        terminos = " ".join(_term(v, lp.names[j]) for j, v in zip(cols, coefs)) or "0 " + lp.names[0]
        lineas.append(f" {nombre}: {terminos} {sentido} {rhs:.12g}")
    lineas.append("Bounds")
    for nombre, lo, hi in zip(lp.names, lp.lb, lp.ub):
        if lo == hi:
            lineas.append(f" {nombre} = {lo:.12g}")
        elif not np.isfinite(lo) and not np.isfinite(hi):
            lineas.append(f" {nombre} free")
        else:
            izquierda = f"{lo:.12g}" if np.isfinite(lo) else "-inf"
            derecha = f" <= {hi:.12g}" if np.isfinite(hi) else ""
            lineas.append(f" {izquierda} <= {nombre}{derecha}")
    lineas.append("End")
    Path(path).write_text("\n".join(lineas) + "\n", encoding="utf-8")
