import json
import os
from fractions import Fraction
from typing import Dict, Iterable, List, Sequence

import numpy as np
import pandas as pd

from .automaton_utils import Ensemble, TrajectoryEvent
from .evolution_utils import WaveFunction
from .lattice_utils import BitConfig, LatticeSpec


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def lattice_to_dict(spec: LatticeSpec) -> dict:
    return {"M_x": spec.M_x, "epsilon": spec.epsilon}


def ensemble_to_dict(e: Ensemble) -> dict:
    """Ensemble as {"lattice": ..., "weights": {tau: p}} with string keys for JSON."""
    return {
        "lattice": lattice_to_dict(e.spec),
        "weights": {str(tau): p for tau, p in sorted(e.weights.items())},
    }


def ensemble_from_dict(d: dict) -> Ensemble:
    try:
        spec = LatticeSpec(**d["lattice"])
        return Ensemble(spec, {int(tau): float(p) for tau, p in d["weights"].items()})
    except (KeyError, TypeError) as e:
        print(f"Error reading ensemble: {str(e)}")
        raise ValueError(f"Malformed ensemble document: {e}") from e


def wavefunction_to_dict(wf: WaveFunction) -> dict:
    """Sparse form: only nonzero amplitudes are written; complex amplitudes as [re, im]."""
    entries = {}
    for tau in np.flatnonzero(wf.q):
        value = wf.q[tau]
        if np.iscomplexobj(wf.q):
            entries[str(int(tau))] = [float(value.real), float(value.imag)]
        else:
            entries[str(int(tau))] = float(value)
    return {"lattice": lattice_to_dict(wf.spec), "t": wf.t, "dimension": wf.dimension, "q": entries}


def wavefunction_from_dict(d: dict) -> WaveFunction:
    try:
        spec = LatticeSpec(**d["lattice"])
        values = list(d["q"].values())
        is_complex = any(isinstance(v, list) for v in values)
        q = np.zeros(int(d["dimension"]), dtype=complex if is_complex else float)
        for tau, value in d["q"].items():
            q[int(tau)] = complex(*value) if isinstance(value, list) else value
        return WaveFunction(spec, q, float(d.get("t", 0.0)))
    except (KeyError, TypeError) as e:
        print(f"Error reading wave function: {str(e)}")
        raise ValueError(f"Malformed wave function document: {e}") from e


def save_json(data, output_file: str):
    try:
        directory = os.path.dirname(output_file)
        if directory:
            ensure_dir(directory)
        with open(output_file, "w", encoding="utf-8") as f:
            json.dump(data, f, indent=2, ensure_ascii=False, sort_keys=True)
    except Exception as e:
        print(f"Error saving {output_file}: {str(e)}")
        raise


def load_json(input_file: str):
    try:
        with open(input_file, "r", encoding="utf-8") as f:
            return json.load(f)
    except Exception as e:
        print(f"Error loading {input_file}: {str(e)}")
        raise


def load_initial_state(input_file: str):
    """An ensemble ({"weights": ...}) or a wave function ({"q": ...}) from JSON."""
    data = load_json(input_file)
    if "weights" in data:
        return ensemble_from_dict(data)
    if "q" in data:
        return wavefunction_from_dict(data)
    raise ValueError(f"{input_file} holds neither an ensemble nor a wave function")


def save_events_jsonl(events: Iterable[TrajectoryEvent], output_file: str):
    """One event per line: {"t": ..., "x": ..., "kind": ...}."""
    try:
        with open(output_file, "w", encoding="utf-8") as f:
            for event in events:
                f.write(json.dumps(event.to_dict(), sort_keys=True) + "\n")
    except Exception as e:
        print(f"Error saving events to {output_file}: {str(e)}")
        raise


def load_events_jsonl(input_file: str) -> List[dict]:
    try:
        with open(input_file, "r", encoding="utf-8") as f:
            return [json.loads(line) for line in f if line.strip()]
    except Exception as e:
        print(f"Error loading events from {input_file}: {str(e)}")
        raise


def trajectory_frame(configs: Sequence[BitConfig]) -> pd.DataFrame:
    return pd.DataFrame(
        {"t": range(len(configs)), "tau": [c.index for c in configs], "bits": [c.bits for c in configs]}
    )


def save_table(rows, output_file: str, columns: Sequence[str] = None) -> pd.DataFrame:
    """Write rows (dicts or a DataFrame) as CSV with a fixed float format."""
    frame = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(list(rows), columns=columns)
    try:
        frame.to_csv(output_file, index=False, float_format="%.15g")
    except Exception as e:
        print(f"Error saving table {output_file}: {str(e)}")
        raise
    return frame


def operator_triplets(entries: Dict) -> pd.DataFrame:
    """Sparse (row, col, value) table; Fraction values are written exactly as text."""
    rows = []
    for (i, j), value in sorted(entries.items()):
        if isinstance(value, Fraction):
            value = str(value)
        rows.append({"row": int(i), "col": int(j), "value": value})
    return pd.DataFrame(rows, columns=["row", "col", "value"])


def save_grassmann_text(elements: Dict[str, object], output_file: str):
    """Named Grassmann elements as "name = polynomial" lines."""
    try:
        with open(output_file, "w", encoding="utf-8") as f:
            for name, element in elements.items():
                f.write(f"{name} = {element.to_text()}\n")
    except Exception as e:
        print(f"Error saving {output_file}: {str(e)}")
        raise
