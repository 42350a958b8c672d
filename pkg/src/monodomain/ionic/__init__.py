"""Ionic cell models addressable by name.

Each registered model may ship a paced steady state and an estimated dt0 in
``data/<name>.json``; those override the reference initial conditions.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Callable

import numpy as np

from . import aliev_panfilov, inert, maccannell, ohara_rudy
from .base import CellModel
from .single_cell import StimulusTemplate

DATA_DIR = Path(__file__).with_name("data")

_FACTORIES: dict[str, Callable[..., CellModel]] = {
    "aliev_panfilov": aliev_panfilov.make_model,
    "ohara_rudy_epi": lambda **kw: ohara_rudy.make_model("epi", **kw),
    "ohara_rudy_mid": lambda **kw: ohara_rudy.make_model("mid", **kw),
    "ohara_rudy_endo": lambda **kw: ohara_rudy.make_model("endo", **kw),
    "maccannell_fibroblast": maccannell.make_model,
    "inert": inert.make_model,
}

DEFAULT_STIMULUS: dict[str, StimulusTemplate] = {
    "aliev_panfilov": StimulusTemplate(50.0, 1.0),
    "ohara_rudy_epi": StimulusTemplate(80.0, 0.5),
    "ohara_rudy_mid": StimulusTemplate(80.0, 0.5),
    "ohara_rudy_endo": StimulusTemplate(80.0, 0.5),
    "maccannell_fibroblast": StimulusTemplate(0.0, 1.0),
    "inert": StimulusTemplate(0.0, 1.0),
}

DEFAULT_TAG_MODELS = {
    "myocyte-epi": "ohara_rudy_epi",
    "myocyte-mid": "ohara_rudy_mid",
    "myocyte-endo": "ohara_rudy_endo",
    "fibroblast": "maccannell_fibroblast",
}


def available_models() -> list[str]:
    return sorted(_FACTORIES)


def data_file(name: str) -> Path:
    return DATA_DIR / f"{name}.json"


def load_model(name: str, use_shipped_state: bool = True) -> CellModel:
    """Build a registered model, applying shipped steady state and dt0 when present."""
    if name not in _FACTORIES:
        raise KeyError(f"unknown cell model {name!r}; registered: {', '.join(available_models())}")
    model = _FACTORIES[name]()
    path = data_file(name)
    if use_shipped_state and path.exists():
        data = json.loads(path.read_text())
        if "dt0" in data:
            model = model.with_dt0(data["dt0"])
        if "state" in data:
            state = np.array([data["state"][k] for k in model.state_names])
            model = model.with_rest(data["v"], state)
    return model


def save_model_data(model: CellModel, **extra) -> Path:
    """Store ``model``'s rest state and dt0 as the shipped data for its name."""
    DATA_DIR.mkdir(exist_ok=True)
    payload = {"name": model.name, "dt0": model.dt0, "v": float(model.rest_v),
               "state": {k: float(x) for k, x in zip(model.state_names, model.rest_state)}}
    payload.update(extra)
    path = data_file(model.name)
    path.write_text(json.dumps(payload, indent=2) + "\n")
    return path


__all__ = ["CellModel", "DEFAULT_STIMULUS", "DEFAULT_TAG_MODELS", "StimulusTemplate",
           "available_models", "load_model", "save_model_data"]


def calibrate(name: str, n_beats: int = 1000, cycle_length: float = 1000.0,
              progress: Callable[[str], None] | None = None, max_halvings: int = 3,
              rush_larsen: bool = False) -> dict:
    """Estimate dt0, pace to steady state and store both as shipped data."""
    from .single_cell import DivergenceError, estimate_dt0, pace_to_steady_state

    base = load_model(name, use_shipped_state=False)
    stim = DEFAULT_STIMULUS[name]
    dt0 = estimate_dt0(base, stim)
    if progress:
        progress(f"{name}: dt0 = {dt0:.6g} ms")
    # A single beat from the reference state can understate the stiffness of
    # the paced state; halve dt0 until the whole pacing run survives.
    for _ in range(max_halvings + 1):
        model = base.with_dt0(dt0)
        try:
            result = pace_to_steady_state(model, cycle_length, n_beats, stim.amplitude, stim.duration,
                                          apd_every=max(1, n_beats // 50), rush_larsen=rush_larsen)
            break
        except DivergenceError as exc:
            if progress:
                progress(f"{name}: {exc}; retrying with dt0 = {dt0 / 2:.6g} ms")
            dt0 /= 2.0
    else:
        raise DivergenceError(f"{name}: pacing diverged after {max_halvings} dt0 halvings")
    paced = model.with_rest(result.v, result.state)
    path = save_model_data(paced, cycle_length=cycle_length, beats=n_beats,
                           pacing_dt=dt0 / 2.0,
                           pacing_gates="rush_larsen" if rush_larsen else "forward_euler", stimulus={"amplitude": stim.amplitude,
                                                          "duration": stim.duration},
                           state_change=result.state_change, apd90_last=result.apd90[-1],
                           apd90_change=result.apd_change)
    if progress:
        progress(f"{name}: paced {n_beats} beats, APD90 {result.apd90[-1]:.2f} ms, "
                 f"last-beat APD90 change {result.apd_change:.4f} ms -> {path.name}")
    return json.loads(path.read_text())
