"""
Line-delimited JSON bridge to tidal analysis programs running in another
process.

One request is one JSON document on one line (UTF-8, LF)::

    {"mode": "analyze", "times": [...], "elevations": [...],
     "constituents": [{"name": "M2", "frequency": 0.5059}], "trend": true}
    {"mode": "predict", "times": [...], "a0": ..., "a1": ..., "epoch_h": 0.0,
     "constituents": [{"name": "M2", "frequency": ..., "amplitude": ...,
                       "phase_deg": ...}]}

and the reply is one line::

    {"a0": ..., "a1": ..., "constituents": [{"name": "M2", "amplitude": ...,
     "phase_deg": ...}]}
    {"elevations": [...]}

A reply of the form ``{"error": "..."}`` reports an engine failure.
Frequencies are always sent; phases always travel in degrees.

:func:`serve` implements the server side around any in-process engine, which
makes ``python -m tapmt.serve`` a self-wrapping external engine.
"""
from __future__ import annotations

import json
import queue
import shlex
import subprocess
import sys
import threading

from .errors import EngineFailure, EngineTimeout, InvalidInputError, ProtocolError
from .harmonic import (
    REFERENCE,
    Constituent,
    ConstituentSet,
    FitConfig,
    TidalSolution,
    TimeSeries,
    constituent_frequency,
)


# -----------------------------------------------------------------------------
# Message encoding
# -----------------------------------------------------------------------------

def analyze_request(series: TimeSeries, constituents: ConstituentSet, config: FitConfig) -> dict:
    return {
        "mode": "analyze",
        "times": series.times.tolist(),
        "elevations": series.elevations.tolist(),
        "constituents": [{"name": c.name, "frequency": c.frequency} for c in constituents],
        "trend": bool(config.include_trend),
    }


def predict_request(solution: TidalSolution, times) -> dict:
    doc = solution.to_dict()
    return {
        "mode": "predict",
        "times": [float(t) for t in times],
        "a0": doc["a0"],
        "a1": doc["a1"],
        "epoch_h": doc["epoch_h"],
        "constituents": doc["constituents"],
    }


def encode(doc: dict) -> str:
    return json.dumps(doc, separators=(",", ":"), allow_nan=True)


def _decode_line(line: str, line_no: int) -> dict:
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"invalid JSON ({exc.msg}): {line[:200]!r}", line_no, line) from None
    if not isinstance(doc, dict):
        raise ProtocolError(f"expected a JSON object, got {line[:200]!r}", line_no, line)
    if "error" in doc:
        raise EngineFailure(f"engine reported: {doc['error']}")
    return doc


def parse_solution(doc: dict, constituents: ConstituentSet, line_no: int = 1) -> TidalSolution:
    known = {c.name: c for c in constituents}
    try:
        entries = doc["constituents"]
        members, amps, phases = [], [], []
        for e in entries:
            name = e["name"]
            if name in known:
                c = known[name]
            elif e.get("frequency") is not None:
                c = Constituent(name, float(e["frequency"]))
            else:
                c = constituent_frequency(name)
            members.append(c)
            amps.append(float(e["amplitude"]))
            phases.append(float(e["phase_deg"]))
        return TidalSolution(
            a0=float(doc["a0"]),
            a1=float(doc.get("a1", 0.0)),
            constituents=ConstituentSet(tuple(members)),
            amplitudes=amps,
            phases=phases,
            epoch=float(doc.get("epoch_h", 0.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"malformed analyze response: {exc!r}", line_no) from None


def parse_elevations(doc: dict, times, line_no: int = 1) -> TimeSeries:
    try:
        return TimeSeries(times, [float(v) for v in doc["elevations"]])
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"malformed predict response: {exc!r}", line_no) from None


# -----------------------------------------------------------------------------
# Client
# -----------------------------------------------------------------------------

def self_command(mutant: str | None = None) -> list[str]:
    """Command line that serves the in-process engine over stdio."""
    cmd = [sys.executable, "-m", "tapmt.serve"]
    if mutant:
        cmd += ["--mutant", mutant]
    return cmd


class ExternalEngine:
    """Engine proxy that talks to a separate process.

    By default every request launches a fresh process (one request line in,
    one reply line out). ``persistent=True`` keeps one process alive and
    exchanges one line per request; calls are then serialised by a lock.
    """

    def __init__(self, command, timeout_s: float = 30.0, persistent: bool = False):
        if isinstance(command, str):
            command = shlex.split(command)
        command = list(command)
        if not command:
            raise InvalidInputError("external engine command is empty")
        if not timeout_s > 0:
            raise InvalidInputError("timeout_s must be positive")
        self.command = command
        self.timeout_s = float(timeout_s)
        self.persistent = persistent
        self._lock = threading.Lock()
        self._proc = None
        self._lines = None
        self._line_no = 0

    def __repr__(self):
        mode = "persistent" if self.persistent else "per-request"
        return f"ExternalEngine({shlex.join(self.command)!r}, {mode})"

    # engine interface
    def analyze(self, series, constituents, config=FitConfig()):
        doc, line_no = self._call(analyze_request(series, constituents, config))
        return parse_solution(doc, constituents, line_no)

    def predict(self, solution, times):
        times = [float(t) for t in times]
        doc, line_no = self._call(predict_request(solution, times))
        return parse_elevations(doc, times, line_no)

    def _call(self, request):
        line = encode(request) + "\n"
        if self.persistent:
            with self._lock:
                return self._call_persistent(line)
        return self._call_once(line)

    def _call_once(self, line):
        try:
            proc = subprocess.run(
                self.command, input=line, capture_output=True, text=True,
                encoding="utf-8", timeout=self.timeout_s,
            )
        except subprocess.TimeoutExpired:
            raise EngineTimeout(f"no reply within {self.timeout_s:g} s") from None
        except OSError as exc:
            raise EngineFailure(f"cannot launch {self.command[0]!r}: {exc}") from None
        if proc.returncode != 0:
            tail = proc.stderr.strip().splitlines()[-1:] or [""]
            raise EngineFailure(f"engine exited with status {proc.returncode}: {tail[0]}")
        lines = proc.stdout.splitlines()
        if not lines or not lines[0].strip():
            raise ProtocolError("empty response", 1)
        return _decode_line(lines[0], 1), 1

    # persistent mode
    def _start(self):
        try:
            self._proc = subprocess.Popen(
                self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL, text=True, encoding="utf-8", bufsize=1,
            )
        except OSError as exc:
            raise EngineFailure(f"cannot launch {self.command[0]!r}: {exc}") from None
        self._lines = queue.Queue()
        self._line_no = 0
        proc, lines = self._proc, self._lines

        def pump():
            for out in proc.stdout:
                lines.put(out)
            lines.put(None)

        threading.Thread(target=pump, daemon=True).start()

    def _call_persistent(self, line):
        if self._proc is None or self._proc.poll() is not None:
            self._start()
        try:
            self._proc.stdin.write(line)
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError):
            self.close()
            raise EngineFailure("engine process closed its input") from None
        try:
            out = self._lines.get(timeout=self.timeout_s)
        except queue.Empty:
            self.close()
            raise EngineTimeout(f"no reply within {self.timeout_s:g} s") from None
        if out is None:
            code = self._proc.wait()
            self.close()
            raise EngineFailure(f"engine exited with status {code}")
        self._line_no += 1
        return _decode_line(out, self._line_no), self._line_no

    def close(self):
        proc, self._proc = self._proc, None
        if proc is not None:
            try:
                proc.stdin.close()
            except OSError:
                pass
            if proc.poll() is None:
                proc.kill()
            proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass


# -----------------------------------------------------------------------------
# Server
# -----------------------------------------------------------------------------

def handle_request(engine, doc: dict) -> dict:
    mode = doc.get("mode")
    entries = doc.get("constituents", [])
    constituents = ConstituentSet(
        tuple(Constituent(e["name"], float(e["frequency"])) for e in entries)
    )
    if mode == "analyze":
        series = TimeSeries(doc["times"], doc["elevations"])
        config = FitConfig(include_trend=bool(doc.get("trend", True)))
        sol = engine.analyze(series, constituents, config)
        out = sol.to_dict()
        if out["epoch_h"] == 0.0:
            del out["epoch_h"]
        return out
    if mode == "predict":
        sol = TidalSolution(
            a0=doc["a0"],
            a1=doc.get("a1", 0.0),
            constituents=constituents,
            amplitudes=[e["amplitude"] for e in entries],
            phases=[e["phase_deg"] for e in entries],
            epoch=doc.get("epoch_h", 0.0),
        )
        return {"elevations": engine.predict(sol, doc["times"]).elevations.tolist()}
    raise InvalidInputError(f"unknown mode {mode!r}")


def serve(engine=REFERENCE, stdin=None, stdout=None) -> int:
    """Answer requests line by line until end of input."""
    stdin = sys.stdin if stdin is None else stdin
    stdout = sys.stdout if stdout is None else stdout
    for line in stdin:
        if not line.strip():
            continue
        try:
            reply = handle_request(engine, json.loads(line))
        except Exception as exc:
            reply = {"error": f"{type(exc).__name__}: {exc}"}
        stdout.write(encode(reply) + "\n")
        stdout.flush()
    return 0
