"""
Modular Form Model - Fourier coefficient oracles.

The CM newforms m_2, m_3, m_4, m_6 come from the Hecke character of Q(i):
a_{j,p} = tr((a + bi)^(j-1)) with p = a^2 + b^2 primary. The level-8 forms of
weight 4 and 6 are ingested from q-expansion files and validated against the
Hecke relations before use; both can be rebuilt from eta quotients to check
the files.
"""
import json
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from sympy import factorint, isprime, primerange

from config.config import config
from src.utils.errors import DataError, DomainError, IntegrityError, MissingDataError
from src.models.ffcore import FieldCtx, sum_of_two_squares


@dataclass(frozen=True)
class CMFormId:
    """CM newform m_j of weight j."""
    j: int

    def __post_init__(self):
        if self.j not in (2, 3, 4, 6):
            raise DomainError(f"no CM form m_{self.j}; weights are 2, 3, 4, 6")

    @property
    def level(self) -> int:
        return 16 if self.j == 3 else 32

    @property
    def nebentypus(self) -> str:
        return 'quadratic' if self.j == 3 else 'trivial'


def cm_coefficient(form, p: int) -> int:
    """
    a_{j,p} for the CM form m_j.

    Args:
        form: CMFormId or the weight j
        p: odd prime

    Returns:
        0 for p = 3 mod 4, tr((a + bi)^(j-1)) otherwise
    """
    j = form.j if isinstance(form, CMFormId) else CMFormId(int(form)).j
    if p == 2:
        raise DomainError("p = 2 is outside the scope of the CM oracles")
    if p < 3 or not isprime(p):
        raise DomainError(f"p={p} is not an odd prime")
    if p % 4 == 3:
        return 0
    return (sum_of_two_squares(p) ** (j - 1)).trace()


def cm_coefficients(p: int) -> Dict[int, int]:
    """{j: a_{j,p}} for the four CM forms m_2, m_3, m_4, m_6."""
    return {j: cm_coefficient(j, p) for j in (2, 3, 4, 6)}


def verify_coef_identities(pmax: int, pmin: int = 3) -> pd.DataFrame:
    """
    Check a3 = a2^2 - 2p, a4 = a2 (a3 - p) and a6 = a4 a3 - p^2 a2 for every
    odd prime up to pmax (rows with p = 3 mod 4 hold trivially).
    """
    rows = []
    for p in primerange(max(3, pmin), pmax + 1):
        a = cm_coefficients(p)
        checks = {
            'a3 = a2^2 - 2p': a[3] == a[2] ** 2 - 2 * p if p % 4 == 1 else a[3] == 0,
            'a4 = a2(a3 - p)': a[4] == a[2] * (a[3] - p) if p % 4 == 1 else a[4] == 0,
            'a6 = a4 a3 - p^2 a2': a[6] == a[4] * a[3] - p * p * a[2] if p % 4 == 1 else a[6] == 0,
        }
        rows.append({'p': int(p), 'a2': a[2], 'a3': a[3], 'a4': a[4], 'a6': a[6],
                     **checks, 'passed': all(checks.values())})
    return pd.DataFrame(rows)


# --- ingested q-expansions ---------------------------------------------------

@dataclass
class QExpansion:
    """Fourier coefficients a_1..a_M of a newform of the given weight and level."""
    label: str
    weight: int
    level: int
    coeffs: List[int]
    source_oracle: str = ''
    metadata: Dict = field(default_factory=dict)

    def __len__(self):
        return len(self.coeffs)

    def coefficient(self, n: int) -> int:
        if n < 1 or n > len(self.coeffs):
            raise DataError(f"{self.label}: a_{n} is outside the ingested range 1..{len(self.coeffs)}")
        return self.coeffs[n - 1]


def validate_qexpansion(qexp: QExpansion):
    """
    Hecke consistency of an ingested expansion, checked index by index.

    Raises:
        DataError: naming the first index that violates normalization,
            multiplicativity, the prime-power recursion or the Deligne bound
    """
    a = [None] + list(qexp.coeffs)
    k, level, M = qexp.weight, qexp.level, len(qexp.coeffs)
    if M == 0 or a[1] != 1:
        raise DataError(f"{qexp.label}: a_1 must be 1")

    for n in range(2, M + 1):
        factors = factorint(n)
        if len(factors) > 1:
            q, e = next(iter(factors.items()))
            part = q ** e
            if a[n] != a[part] * a[n // part]:
                raise DataError(f"{qexp.label}: multiplicativity fails at a_{n} = a_{part} * a_{n // part}")
            continue
        (q, e), = factors.items()
        if e == 1:
            if level % q and a[n] ** 2 > 4 * q ** (k - 1):
                raise DataError(f"{qexp.label}: Deligne bound fails at a_{n} = {a[n]}")
            continue
        if level % q:
            expected = a[q] * a[n // q] - q ** (k - 1) * a[n // (q * q)]
        else:
            expected = a[q] * a[n // q]
        if a[n] != expected:
            raise DataError(f"{qexp.label}: Hecke recursion fails at a_{n} (expected {expected}, found {a[n]})")


def load_qexpansion(text: str) -> QExpansion:
    """Parse and validate {"label", "weight", "level", "source_oracle", "coeffs"}."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise DataError(f"q-expansion document is not valid JSON: {e}") from e
    try:
        qexp = QExpansion(
            label=str(doc['label']),
            weight=int(doc['weight']),
            level=int(doc['level']),
            coeffs=[int(c) for c in doc['coeffs']],
            source_oracle=str(doc.get('source_oracle', '')),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"malformed q-expansion document: {e}") from e
    validate_qexpansion(qexp)
    return qexp


def load_qexpansion_file(key_or_path: str, data_dir: Optional[str] = None) -> QExpansion:
    """Load a DATA_FILES key (e.g. level8_weight6) or a path; DataError when absent."""
    data_dir = data_dir or config.DATA_DIR
    path = os.path.join(data_dir, config.DATA_FILES[key_or_path]) if key_or_path in config.DATA_FILES else key_or_path
    if not os.path.exists(path):
        raise MissingDataError(f"coefficient file not found: {path}")
    with open(path, encoding='utf-8') as fh:
        return load_qexpansion(fh.read())


def level8_forms(data_dir: Optional[str] = None):
    """(weight-6, weight-4) level-8 expansions from the data directory."""
    return load_qexpansion_file('level8_weight6', data_dir), load_qexpansion_file('level8_weight4', data_dir)


# --- eta quotients -----------------------------------------------------------

# d -> r_d in prod eta(d z)^(r_d)
ETA_WEIGHT4 = {2: 4, 4: 4}
ETA_WEIGHT6 = {1: 4, 2: 2, 4: 2, 8: 4}


def eta_product(exponents: Dict[int, int], terms: int) -> np.ndarray:
    """
    c_0..c_{terms-1} of prod_d eta(d z)^(r_d) as a power series in q.

    Raises:
        DomainError: a negative exponent, or sum d r_d not divisible by 24
    """
    shift, rest = divmod(sum(d * r for d, r in exponents.items()), 24)
    if rest or any(d < 1 or r < 0 for d, r in exponents.items()):
        raise DomainError(f"eta product {exponents} is not a holomorphic integral q-series")
    series = np.zeros(terms, dtype=np.int64)
    if shift < terms:
        series[shift] = 1
    for d, r in exponents.items():
        for m in range(d, terms, d):
            for _ in range(r):
                series[m:] = series[m:] - series[:-m]
    return series


def level8_eta_form(weight: int, terms: int = 250) -> QExpansion:
    """
    The level-8 newform of weight 4 or 6 rebuilt from eta quotients.

    Weight 4 is eta(2z)^4 eta(4z)^4. In weight 6, g = eta(z)^4 eta(2z)^2
    eta(4z)^2 eta(8z)^4 and the old forms eta(2z)^12, eta(4z)^12 span
    S_6(Gamma_0(8)); the old forms have T_3 eigenvalue -12, so (T_3 + 12) g
    is a multiple of the newform.
    """
    if weight == 4:
        coeffs = eta_product(ETA_WEIGHT4, terms + 1)[1:]
        source = "eta(2z)^4 eta(4z)^4"
    elif weight == 6:
        g = eta_product(ETA_WEIGHT6, 3 * terms + 1)
        n = np.arange(1, terms + 1)
        image = g[3 * n] + 12 * g[n]
        thirds = n[n % 3 == 0]
        image[thirds - 1] += 3 ** 5 * g[thirds // 3]
        lead = int(image[0])
        if lead == 0 or np.any(image % lead):
            raise IntegrityError(f"(T_3 + 12) g is not a multiple of its leading coefficient {lead}")
        coeffs = image // lead
        source = "(T_3 + 12) eta(z)^4 eta(2z)^2 eta(4z)^2 eta(8z)^4, normalized"
    else:
        raise DomainError(f"no level-8 eta construction in weight {weight}; weights are 4 and 6")
    qexp = QExpansion(f"8.{weight}.a.a", weight, 8, [int(c) for c in coeffs], source_oracle=source)
    validate_qexpansion(qexp)
    return qexp


# --- predictions -------------------------------------------------------------

def sum_powers(p: int, top: int = 5) -> int:
    """1 + p + ... + p^top."""
    return sum(p ** i for i in range(top + 1))


def predict_F1(ctx: FieldCtx, qexp6: QExpansion, qexp4: QExpansion) -> int:
    """sum_{i<=5} p^i - a_p - (b_p + phi(-1) p) p with a_p, b_p of the level-8 forms."""
    p = ctx.p
    a_p, b_p = qexp6.coefficient(p), qexp4.coefficient(p)
    return sum_powers(p) - a_p - (b_p + ctx.legendre(-1) * p) * p


def predict_V32(ctx: FieldCtx) -> int:
    """sum_{i<=5} p^i - a_{6,p} - p a_{4,p} - 2 p^2 a_{2,p}."""
    p = ctx.p
    a = cm_coefficients(p)
    return sum_powers(p) - a[6] - p * a[4] - 2 * p * p * a[2]

