from dataclasses import dataclass, field
from typing import Optional


@dataclass
class ReportRow:
    task: str
    name: str
    value: object
    inputs: dict = field(default_factory=dict)
    formula: Optional[float] = None
    ratio: Optional[float] = None
    provenance: str = ""
    error_budget: Optional[float] = None
    check: Optional[bool] = None
    note: str = ""

    def __post_init__(self):
        if self.ratio is None and self.formula not in (None, 0) and isinstance(self.value, (int, float)):
            self.ratio = float(self.value) / float(self.formula)


@dataclass
class BoundReport:
    name: str
    rows: list = field(default_factory=list)

    def add(self, *args, **kwargs):
        row = ReportRow(self.name, *args, **kwargs)
        self.rows.append(row)
        return row

    @property
    def passed(self):
        return all(r.check is not False for r in self.rows)

    def __getitem__(self, name):
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)
