"""Command-line front end: ``qmuse {rhythm,timbre,harmony,spatial,compose,selftest}``."""

from __future__ import annotations

import argparse
import enum
import os
import sys
import tempfile
from pathlib import Path
from typing import Sequence

from . import compose, harmony, qcore, render, rhythm, selftest, spatial, timbre
from .render import MultiBuffer, NoteEvent, Scene, SceneEvent
from .rng import RngStream
from .spatial import Position

SEED_ENV = "QMUSE_SEED"


class ExitStatus(enum.IntEnum):
    OK = 0
    FAILURE = 1
    CONFIG = 2
    RENDER = 3
    IO = 4


class UsageError(Exception):
    """Bad flag values; maps to exit status 2."""


def _resolve_seed(flag: int | None, fallback: int = 0) -> int:
    if flag is not None:
        seed = flag
    elif os.environ.get(SEED_ENV, "").strip():
        try:
            seed = int(os.environ[SEED_ENV])
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer, got {os.environ[SEED_ENV]!r}") from None
    else:
        seed = fallback
    if not 0 <= seed < 2**64:
        raise UsageError(f"seed must be in [0, 2**64), got {seed}")
    return seed


def _umask() -> int:
    mask = os.umask(0)
    os.umask(mask)
    return mask


def _write_outputs(outputs: dict[Path, bytes]) -> None:
    """Write every file or none: stage to temporaries, then rename into place."""
    staged: list[tuple[str, Path]] = []
    mode = 0o666 & ~_umask()
    try:
        for path, data in outputs.items():
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.chmod(tmp, mode)
            staged.append((tmp, path))
        for tmp, path in staged:
            os.replace(tmp, path)
    except BaseException:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)
        raise


def _position(text: str) -> Position:
    try:
        parts = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"position {text!r} must be x,y,z numbers") from None
    if len(parts) != 3:
        raise UsageError(f"position {text!r} must have exactly three coordinates")
    try:
        return Position(*parts)
    except spatial.SpatialError as exc:
        raise UsageError(f"position {text!r}: {exc}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


def _register(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(v) for v in text.split(":"))
    except ValueError:
        raise UsageError(f"register must look like 48:84, got {text!r}") from None
    return lo, hi


def _stereo(events: Sequence[SceneEvent], seed: int, sample_rate: int, threads: int) -> MultiBuffer:
    scene = Scene(tuple(events), "stereo", sample_rate, seed)
    return render.clip_guard(render.render_scene(scene, threads), "normalize")


PERCUSSION = timbre.NoteSpec(
    1500.0, 0.08, timbre.Percussive(60.0), timbre.ParticleNoiseParams(200.0, 0.6)
)
CLAVE_MIDI = 76


# -- subcommands -------------------------------------------------------------

def cmd_rhythm(args) -> dict[Path, bytes]:
    seed = _resolve_seed(args.seed)
    text = args.template
    if text is None:
        text = rhythm.SON_CLAVE_TEXT
    elif Path(text).is_file():
        text = Path(text).read_text(encoding="utf-8").strip()
    if not args.tempo > 0:
        raise UsageError("--tempo must be positive")
    try:
        template = rhythm.parse_template(text)
        qcore.rx_angle_for_probability(args.p)
    except (rhythm.TemplateError, qcore.QuantumError) as exc:
        raise UsageError(str(exc)) from None
    span = rhythm.template_duration(template, args.tempo)
    if args.count < 1:
        raise UsageError("--count must be >= 1")

    root = RngStream(seed, "rhythm")
    cell_s = span / len(template)
    realizations, notes = [], []
    for r in range(args.count):
        real = rhythm.realize(template, args.p, root.derive("realization", r))
        realizations.append(real.bitstring)
        for ev in rhythm.events(real, args.tempo):
            notes.append(
                NoteEvent(r * span + ev.onset_seconds, cell_s, CLAVE_MIDI, PERCUSSION.freq_hz,
                          Position(), ("rhythm", f"realization:{r}", f"cell:{ev.cell_index}"))
            )
    out = Path(args.out or f"rhythm.{args.format}")
    if args.format == "json":
        extra = {"template": template.text, "p": args.p, "tempo_bpm": args.tempo, "realizations": realizations}
        return {out: render.dumps_stable(render.events_document(notes, seed, extra)).encode()}
    if args.format == "midi":
        return {out: render.midi_bytes(notes, args.tempo)}
    events = [SceneEvent(n.onset_s, PERCUSSION, n.position, i) for i, n in enumerate(notes)]
    return {out: render.wav_bytes(_stereo(events, seed, args.sample_rate, args.threads))}


def cmd_timbre(args) -> dict[Path, bytes]:
    seed = _resolve_seed(args.seed)
    try:
        env = (timbre.Percussive(args.window_ms) if args.env == "percussive"
               else timbre.Sustained(args.attack_ms, args.release_ms))
        spec = timbre.NoteSpec(args.freq, args.duration, env, timbre.ParticleNoiseParams(args.rate, args.amplitude))
        if spec.freq_hz >= args.sample_rate / 2:
            raise UsageError(f"--freq {args.freq} Hz must be below Nyquist ({args.sample_rate / 2} Hz)")
        timbre.envelope_curve(env, timbre.sample_count(args.duration, args.sample_rate), args.sample_rate)
    except timbre.TimbreError as exc:
        raise UsageError(str(exc)) from None
    buf = timbre.synth_note(spec, RngStream(seed, "timbre"), args.sample_rate)
    return {Path(args.out or "timbre.wav"): render.wav_bytes(MultiBuffer(buf.samples, args.sample_rate))}


def cmd_harmony(args) -> dict[Path, bytes]:
    seed = _resolve_seed(args.seed)
    try:
        spec = harmony.CloudSpec(
            harmony.Chord.from_names(args.chord_a),
            harmony.Chord.from_names(args.chord_b),
            harmony.CrossfadeSchedule.parse(args.schedule),
            args.duration,
            args.rate,
            _register(args.register),
        )
    except harmony.HarmonyError as exc:
        raise UsageError(str(exc)) from None
    cloud = harmony.generate_cloud(spec, RngStream(seed, "harmony"))
    notes = [
        NoteEvent(n.onset_s, n.duration_s, n.midi_note, timbre.midi_to_hz(n.midi_note), Position(),
                  ("cloud", f"chord:{n.chord_tag}"))
        for n in cloud
    ]
    out = Path(args.out or f"cloud.{args.format}")
    if args.format == "json":
        extra = {
            "chord_a": sorted(spec.chord_a.pitch_classes),
            "chord_b": sorted(spec.chord_b.pitch_classes),
            "schedule": [list(bp) for bp in spec.schedule.breakpoints],
        }
        return {out: render.dumps_stable(render.events_document(notes, seed, extra)).encode()}
    if args.format == "midi":
        return {out: render.midi_bytes(notes, args.tempo)}
    inst = timbre.Sustained(10.0, min(60.0, spec.note_length_s * 500))
    events = [
        SceneEvent(n.onset_s, timbre.NoteSpec(n.freq_hz, n.duration_s, inst, timbre.ParticleNoiseParams(40.0, 0.35)),
                   n.position, i)
        for i, n in enumerate(notes)
    ]
    return {out: render.wav_bytes(_stereo(events, seed, args.sample_rate, args.threads))}


def cmd_spatial(args) -> dict[Path, bytes]:
    seed = _resolve_seed(args.seed)
    start, end = _position(args.start), _position(args.end)
    if args.events < 1:
        raise UsageError("--events must be >= 1")
    if args.shots_profile is not None:
        shots = (spatial.swell_profile(args.events) if args.shots_profile == "swell"
                 else _int_list(args.shots_profile))
    else:
        shots = args.shots
    try:
        profile = spatial.shots_profile(shots, args.events)
    except spatial.SpatialError as exc:
        raise UsageError(str(exc)) from None
    original = spatial.linear_path(spatial.PathSpec(start, end, args.events))
    moved = spatial.perturb_path(original, profile, RngStream(seed, "spatial"), args.edge_clamp)
    out = Path(args.out or f"path.{args.format}")
    click = timbre.NoteSpec(660.0, 0.05, timbre.Percussive(40.0), timbre.ParticleNoiseParams(120.0, 0.6))
    if args.format == "json":
        notes = [NoteEvent(k * args.interval, click.duration_s, None, click.freq_hz, p, ("path", f"step:{k}"))
                 for k, p in enumerate(moved)]
        extra = {
            "original": [list(p.as_tuple()) for p in original],
            "perturbed": [list(p.as_tuple()) for p in moved],
            "shots": profile,
        }
        return {out: render.dumps_stable(render.events_document(notes, seed, extra)).encode()}
    events = [SceneEvent(k * args.interval, click, p, k) for k, p in enumerate(moved)]
    return {out: render.wav_bytes(_stereo(events, seed, args.sample_rate, args.threads))}


def cmd_compose(args) -> dict[Path, bytes]:
    config = compose.load_config(args.config)
    seed = _resolve_seed(args.seed, config.seed)
    scene = compose.build_scene(config, seed)
    mix = render.clip_guard(render.render_scene(scene, args.threads), config.clip_mode)
    stem = Path(args.config).stem
    out_dir = Path(args.out_dir)
    doc = render.events_document(compose.scene_note_events(scene), seed, {"layout": config.layout})
    outputs = {
        out_dir / f"{stem}.wav": render.wav_bytes(mix, args.bit_depth),
        out_dir / f"{stem}.json": render.dumps_stable(doc).encode(),
    }
    if args.midi:
        pitched = [n for n in compose.scene_note_events(scene) if n.midi is not None]
        outputs[out_dir / f"{stem}.mid"] = render.midi_bytes(pitched, config.tempo_bpm)
    return outputs


def cmd_selftest(args) -> int:
    return ExitStatus.OK if selftest.run() else ExitStatus.FAILURE


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qmuse", description="Quantum-measurement rhythm, timbre, harmony and spatialization."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, formats=None):
        p.add_argument("--seed", type=int, default=None, help=f"master seed (default: ${SEED_ENV} or 0)")
        p.add_argument("--out", default=None, help="output file")
        p.add_argument("--sample-rate", type=int, default=timbre.DEFAULT_SAMPLE_RATE)
        p.add_argument("--threads", type=int, default=1, help="synthesis threads; output does not depend on it")
        if formats:
            p.add_argument("--format", choices=formats, default=formats[0])

    p = sub.add_parser("rhythm", help="realize a rhythm template")
    common(p, ["json", "midi", "wav"])
    p.add_argument("--template", default=None, help="template string or file (default: son clave)")
    p.add_argument("--p", type=float, default=0.5, help="probability that a mutable cell sounds")
    p.add_argument("--tempo", type=float, default=120.0)
    p.add_argument("--count", type=int, default=1, help="number of consecutive realizations")
    p.set_defaults(func=cmd_rhythm)

    p = sub.add_parser("timbre", help="render one particle-noise note to mono WAV")
    common(p)
    p.add_argument("--freq", type=float, default=440.0)
    p.add_argument("--rate", type=float, default=50.0, help="collisions per second")
    p.add_argument("--duration", type=float, default=1.0)
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--env", choices=["sustained", "percussive"], default="sustained")
    p.add_argument("--window-ms", type=float, default=30.0)
    p.add_argument("--attack-ms", type=float, default=10.0)
    p.add_argument("--release-ms", type=float, default=10.0)
    p.set_defaults(func=cmd_timbre)

    p = sub.add_parser("harmony", help="generate a crossfading note cloud")
    common(p, ["json", "midi", "wav"])
    p.add_argument("--chord-a", default="B,D,F,Ab")
    p.add_argument("--chord-b", default="C,E,G")
    p.add_argument("--schedule", default="0:0,0.5:0,1.5:1,2:1", help="t:p pairs for chord B")
    p.add_argument("--duration", type=float, default=2.0)
    p.add_argument("--rate", type=float, default=harmony.DEFAULT_NOTE_RATE, help="notes per second")
    p.add_argument("--register", default="48:84")
    p.add_argument("--tempo", type=float, default=120.0, help="MIDI export tempo")
    p.set_defaults(func=cmd_harmony)

    p = sub.add_parser("spatial", help="perturb a linear soundpath with shot noise")
    common(p, ["json", "wav"])
    p.add_argument("--start", default="0,0.5,0.5")
    p.add_argument("--end", default="1,0.5,0.5")
    p.add_argument("--events", type=int, default=32)
    p.add_argument("--shots", type=int, default=256)
    p.add_argument("--shots-profile", default=None, help="comma-separated shots per event, or 'swell'")
    p.add_argument("--edge-clamp", action="store_true", help="let coordinates at 0 or 1 jitter too")
    p.add_argument("--interval", type=float, default=0.125, help="seconds between events")
    p.set_defaults(func=cmd_spatial)

    p = sub.add_parser("compose", help="render a YAML composition config")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=None, help=f"overrides ${SEED_ENV} and the config seed")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--bit-depth", type=int, choices=[16, 24], default=16)
    p.add_argument("--midi", action="store_true", help="also write a MIDI file of pitched events")
    p.set_defaults(func=cmd_compose)

    p = sub.add_parser("selftest", help="run fast built-in checks")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if getattr(args, "threads", 1) < 1:
            raise UsageError("--threads must be >= 1")
        if getattr(args, "sample_rate", 48000) < 8000:
            raise UsageError("--sample-rate must be at least 8000")
        result = args.func(args)
        if isinstance(result, int):
            return int(result)
        _write_outputs(result)
    except (UsageError, compose.ConfigError) as exc:
        print(f"qmuse: error: {exc}", file=sys.stderr)
        return int(ExitStatus.CONFIG)
    except OSError as exc:
        print(f"qmuse: I/O error: {exc}", file=sys.stderr)
        return int(ExitStatus.IO)
    except (render.RenderError, timbre.TimbreError, ValueError) as exc:
        print(f"qmuse: render error: {exc}", file=sys.stderr)
        return int(ExitStatus.RENDER)
    for path in result:
        print(path)
    return int(ExitStatus.OK)


if __name__ == "__main__":
    sys.exit(main())
