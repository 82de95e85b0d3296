"""
Record types and the append-only point-count cache.
"""
import json
import os
import threading
from dataclasses import asdict, dataclass, field
from datetime import datetime
from typing import Dict, Iterator, List, Optional, Tuple

import pandas as pd

from config.config import config
from src.utils.errors import DataError, IntegrityError

METHODS = ('brute', 'fibration', 'formula', 'hypergeometric', 'quotient-brute', 'quotient-h90')


@dataclass
class CountRecord:
    """A point count [V]_p together with how and how fast it was obtained."""
    variety_id: str
    p: int
    method: str
    count: int
    wall_ms: float = 0.0
    details: Dict = field(default_factory=dict)

    @property
    def key(self) -> Tuple[str, int, str]:
        return (self.variety_id, self.p, self.method)

    def to_dict(self) -> Dict:
        data = asdict(self)
        data['kind'] = 'count'
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> 'CountRecord':
        return cls(
            variety_id=str(data['variety_id']),
            p=int(data['p']),
            method=str(data['method']),
            count=int(data['count']),
            wall_ms=float(data.get('wall_ms', 0.0)),
            details=dict(data.get('details', {})),
        )


@dataclass
class CacheEntry:
    key: Tuple[str, int, str]
    record: CountRecord


@dataclass
class VerificationRow:
    """One (claim, p) comparison; passed iff predicted == counted."""
    claim: str
    p: int
    label: str
    predicted: int
    counted: int
    methods: str
    wall_ms: float = 0.0
    status: str = ''

    def __post_init__(self):
        if not self.status:
            self.status = 'pass' if self.predicted == self.counted else 'fail'

    @property
    def passed(self) -> bool:
        return self.status in ('pass', 'finding', 'skipped')


@dataclass
class VerificationRun:
    """All rows produced by one cmd_verify invocation."""
    claim: str
    pmin: Optional[int]
    pmax: Optional[int]
    rows: List[VerificationRow] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)
    started_at: str = field(default_factory=lambda: datetime.utcnow().isoformat(timespec='seconds'))

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows)

    @property
    def summary(self) -> Dict:
        counts = {}
        for row in self.rows:
            counts[row.status] = counts.get(row.status, 0) + 1
        return {'claim': self.claim, 'rows': len(self.rows), 'passed': self.passed, **counts}

    def to_dict(self) -> Dict:
        return {
            'kind': 'verification',
            'claim': self.claim,
            'pmin': self.pmin,
            'pmax': self.pmax,
            'started_at': self.started_at,
            'notes': self.notes,
            'rows': [asdict(row) for row in self.rows],
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'VerificationRun':
        run = cls(data['claim'], data.get('pmin'), data.get('pmax'),
                  notes=list(data.get('notes', [])), started_at=data.get('started_at', ''))
        run.rows = [VerificationRow(**row) for row in data.get('rows', [])]
        return run

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(row) for row in self.rows],
                            columns=['claim', 'p', 'label', 'predicted', 'counted', 'methods', 'wall_ms', 'status'])


class PointCountCache:
    """
    JSONL cache of CountRecords and verification runs.

    The file is append-only. A corrupt line or a recomputed count that
    disagrees with a cached one raises IntegrityError.
    """

    def __init__(self, path: Optional[str] = None):
        self.path = path or config.CACHE_PATH
        self._records: Dict[Tuple[str, int, str], CountRecord] = {}
        self._runs: List[VerificationRun] = []
        self._lock = threading.Lock()
        self._load()

    def _load(self):
        if not os.path.exists(self.path):
            return
        with open(self.path, encoding='utf-8') as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    data = json.loads(line)
                    kind = data.get('kind', 'count')
                    if kind == 'count':
                        record = CountRecord.from_dict(data)
                        self._check(record)
                        self._records[record.key] = record
                    elif kind == 'verification':
                        self._runs.append(VerificationRun.from_dict(data))
                    else:
                        raise ValueError(f"unknown kind {kind!r}")
                except IntegrityError:
                    raise
                except (ValueError, KeyError, TypeError) as e:
                    raise IntegrityError(f"{self.path}:{lineno}: corrupt cache line ({e})") from e

    def _check(self, record: CountRecord):
        cached = self._records.get(record.key)
        if cached is not None and cached.count != record.count:
            raise IntegrityError(
                f"cache mismatch for {record.key}: cached {cached.count}, computed {record.count}"
            )

    def _append(self, data: Dict):
        directory = os.path.dirname(os.path.abspath(self.path))
        os.makedirs(directory, exist_ok=True)
        with open(self.path, 'a', encoding='utf-8') as fh:
            fh.write(json.dumps(data, sort_keys=True) + '\n')

    def __len__(self):
        return len(self._records)

    def __contains__(self, key) -> bool:
        return tuple(key) in self._records

    def get(self, variety_id: str, p: int, method: str) -> Optional[CountRecord]:
        return self._records.get((variety_id, p, method))

    def put(self, record: CountRecord) -> CountRecord:
        """Store a record; an existing record with the same key must agree."""
        with self._lock:
            self._check(record)
            if record.key not in self._records:
                self._records[record.key] = record
                self._append(record.to_dict())
            return self._records[record.key]

    def add_run(self, run: VerificationRun):
        with self._lock:
            self._runs.append(run)
            self._append(run.to_dict())

    def entries(self) -> Iterator[CacheEntry]:
        for key, record in sorted(self._records.items()):
            yield CacheEntry(key, record)

    @property
    def runs(self) -> List[VerificationRun]:
        return list(self._runs)

    def counts_frame(self) -> pd.DataFrame:
        rows = [{k: v for k, v in asdict(e.record).items() if k != 'details'} for e in self.entries()]
        return pd.DataFrame(rows, columns=['variety_id', 'p', 'method', 'count', 'wall_ms'])

    def runs_frame(self) -> pd.DataFrame:
        frames = [run.to_frame() for run in self._runs if run.rows]
        if not frames:
            return pd.DataFrame(columns=['claim', 'p', 'label', 'predicted', 'counted', 'methods', 'wall_ms', 'status'])
        return pd.concat(frames, ignore_index=True)


def open_cache(path: Optional[str] = None) -> PointCountCache:
    """Open the cache at path (or the configured CACHE_PATH)."""
    try:
        return PointCountCache(path)
    except OSError as e:
        raise DataError(f"cannot read cache {path or config.CACHE_PATH}: {e}") from e
