import json
import math
import struct

import mido
import numpy as np
import pytest
from scipy.io import wavfile

from qmuse import render, rhythm
from qmuse.render import MultiBuffer, NoteEvent, RenderError, Scene, SceneEvent
from qmuse.rng import RngStream
from qmuse.spatial import Position
from qmuse.timbre import NoteSpec, ParticleNoiseParams, Percussive, Sustained

SR = 48000


def note(freq=440.0, dur=0.2):
    return NoteSpec(freq, dur, Sustained(5, 5), ParticleNoiseParams(50, 0.5))


def event(i, onset=0.0, x=0.5, freq=440.0, dur=0.2, y=0.5, z=0.5):
    return SceneEvent(onset, note(freq, dur), Position(x, y, z), i, midi=69)


class TestScene:
    def test_empty_scene_is_silent(self):
        out = render.render_scene(Scene((), tail_s=0.5))
        assert out.data.shape == (2, 24000) and not out.data.any()

    def test_centre_is_identical_on_both_channels(self):
        out = render.render_scene(Scene((event(0),)))
        assert np.array_equal(out.data[0], out.data[1])
        assert out.data.any()

    def test_hard_left(self):
        out = render.render_scene(Scene((event(0, x=0.0),)))
        assert out.data[0].any() and not out.data[1].any()

    def test_mix_is_the_sum_of_solo_renders(self):
        evs = (event(0, 0.0, 0.1), event(1, 0.5, 0.9, 880))
        full = render.render_scene(Scene(evs, tail_s=0)).data
        solos = [render.render_scene(Scene((e,), tail_s=0)).data for e in evs]
        summed = np.zeros_like(full)
        for s in solos:
            summed[:, : s.shape[1]] += s
        assert np.allclose(full, summed, atol=1e-15)

    def test_length_includes_tail(self):
        out = render.render_scene(Scene((event(0, 1.0, dur=0.5),), tail_s=0.25))
        assert out.frames == int(1.75 * SR)

    @pytest.mark.parametrize("workers", [2, 4, 8])
    def test_thread_count_does_not_matter(self, workers):
        evs = tuple(event(i, i * 0.05, (i % 7) / 6, 200 + 50 * i) for i in range(24))
        scene = Scene(evs, master_seed=77)
        a = render.render_scene(scene, 1).data
        assert np.array_equal(a, render.render_scene(scene, workers).data)

    def test_event_order_in_the_tuple_does_not_matter(self):
        evs = [event(i, i * 0.1, 0.2 * (i % 5)) for i in range(6)]
        a = render.render_scene(Scene(tuple(evs), master_seed=3)).data
        b = render.render_scene(Scene(tuple(reversed(evs)), master_seed=3)).data
        assert np.array_equal(a, b)

    def test_seed_changes_the_noise(self):
        a = render.render_scene(Scene((event(0),), master_seed=1)).data
        b = render.render_scene(Scene((event(0),), master_seed=2)).data
        assert not np.array_equal(a, b)

    def test_energy_is_position_independent(self):
        energies = []
        for k in range(100):
            out = render.render_scene(Scene((event(0, x=k / 99, dur=0.05),), master_seed=5, tail_s=0))
            energies.append(np.sum(out.data**2))
        assert max(energies) / min(energies) - 1 < 0.01

    def test_cube_layout(self):
        out = render.render_scene(Scene((event(0, x=1, y=0, z=1),), layout="cube8"))
        assert out.channel_count == 8
        assert [bool(ch.any()) for ch in out.data] == [i == 0b101 for i in range(8)]

    def test_cube_energy_matches_mono(self):
        out = render.render_scene(Scene((event(0, x=0.3, y=0.8, z=0.6),), layout="cube8", master_seed=9))
        mono = render.render_scene(Scene((event(0, x=0.0),), master_seed=9)).data[0]
        assert np.sum(out.data**2) == pytest.approx(np.sum(mono**2), rel=1e-12)

    def test_nyquist_is_reported(self):
        scene = Scene((event(4, freq=12000),), sample_rate_hz=22050)
        with pytest.raises(RenderError, match="event 4"):
            render.render_scene(scene)

    def test_duplicate_index(self):
        with pytest.raises(RenderError):
            Scene((event(1), event(1, 0.5)))

    def test_unknown_layout(self):
        with pytest.raises(RenderError):
            Scene((), layout="quad")

    def test_negative_onset(self):
        with pytest.raises(RenderError):
            event(0, onset=-0.1)


class TestClipGuard:
    LOUD = MultiBuffer(np.array([[0.5, -2.0, 1.5], [0.1, 0.2, -0.3]]), SR)

    def test_clip(self):
        out = render.clip_guard(self.LOUD, "clip").data
        assert out.tolist() == [[0.5, -1.0, 1.0], [0.1, 0.2, -0.3]]

    def test_normalize(self):
        out = render.clip_guard(self.LOUD, "normalize")
        assert out.peak() == pytest.approx(0.99)
        assert np.allclose(out.data / self.LOUD.data, 0.99 / 2.0)

    def test_quiet_signal_untouched(self):
        quiet = MultiBuffer(np.full((2, 4), 0.3), SR)
        assert render.clip_guard(quiet, "normalize") is quiet
        assert np.array_equal(render.clip_guard(quiet, "clip").data, quiet.data)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            render.clip_guard(self.LOUD, "fold")


class TestMultiBuffer:
    @pytest.mark.parametrize("shape", [(9, 4), (2, 2, 2)])
    def test_bad_shapes(self, shape):
        with pytest.raises(RenderError):
            MultiBuffer(np.zeros(shape), SR)

    def test_nan(self):
        with pytest.raises(RenderError):
            MultiBuffer(np.array([[0.0, math.nan]]), SR)


def one_second_stereo():
    t = np.arange(SR) / SR
    return MultiBuffer(np.stack([0.5 * np.sin(2 * np.pi * 440 * t), -0.25 * np.sin(2 * np.pi * 660 * t)]), SR)


class TestWav:
    def test_header_fields(self):
        data = render.wav_bytes(one_second_stereo())
        assert data[:4] == b"RIFF" and data[8:12] == b"WAVE" and data[12:16] == b"fmt "
        riff_size = struct.unpack("<I", data[4:8])[0]
        fmt = struct.unpack("<IHHIIHH", data[16:36])
        assert fmt == (16, 1, 2, 48000, 192000, 4, 16)
        assert data[36:40] == b"data"
        assert struct.unpack("<I", data[40:44])[0] == 192000
        assert len(data) == 44 + 192000 and riff_size == len(data) - 8

    def test_round_trip(self, tmp_path):
        buf = one_second_stereo()
        path = tmp_path / "a.wav"
        render.write_wav(buf, path)
        ints, sr, bits = render.read_wav(path)
        assert (sr, bits) == (SR, 16)
        assert np.array_equal(ints, render.quantize(buf.data, 16))

    def test_independent_reader(self, tmp_path):
        buf = one_second_stereo()
        path = tmp_path / "b.wav"
        render.write_wav(buf, path)
        sr, arr = wavfile.read(path)
        assert sr == SR and arr.dtype == np.int16 and arr.shape == (SR, 2)
        assert np.array_equal(arr.T, render.quantize(buf.data, 16))

    def test_24_bit(self, tmp_path):
        buf = MultiBuffer(np.array([[-1.0, -0.5, 0.0, 0.5, 1.0], [1e-7, -1e-7, 0.25, -0.25, 0.75]]), SR)
        path = tmp_path / "c.wav"
        render.write_wav(buf, path, 24)
        ints, sr, bits = render.read_wav(path)
        assert bits == 24
        assert ints[0].tolist() == [-8388607, -4194304, 0, 4194304, 8388607]
        _, arr = wavfile.read(path)
        # scipy widens 24-bit samples into the top of an int32
        assert np.array_equal(arr.T >> 8, ints)

    def test_quantization_rule(self):
        q = render.quantize(np.array([1.0, -1.0, 0.5 / 32767, -0.5 / 32767, 2.0]), 16)
        assert q.tolist() == [32767, -32767, 1, -1, 32767]

    def test_mono_and_eight_channel(self, tmp_path):
        for ch in (1, 8):
            path = tmp_path / f"{ch}.wav"
            render.write_wav(MultiBuffer(np.full((ch, 10), 0.1), SR), path)
            assert render.read_wav(path)[0].shape == (ch, 10)

    def test_bad_depth(self):
        with pytest.raises(ValueError):
            render.wav_bytes(one_second_stereo(), 8)


def sample_events():
    return [
        NoteEvent(0.0, 0.1, 76, 1760.0, Position(0.1, 0.5, 0.5), ("rhythm",)),
        NoteEvent(1 / 3, 0.25, None, 523.251130601, Position(1 / 7, 0.2, 0.9), ("cloud", "B")),
    ]


class TestJson:
    def test_schema(self, tmp_path):
        path = tmp_path / "e.json"
        render.write_events_json(sample_events(), path, seed=11)
        doc = json.loads(path.read_text())
        assert doc["version"] == 1 and doc["seed"] == 11
        assert set(doc["events"][0]) == {"onset_s", "duration_s", "midi", "freq_hz", "position", "tags"}
        second = doc["events"][1]
        assert second["onset_s"] == 0.333333 and second["midi"] is None
        assert second["position"] == {"x": 0.142857, "y": 0.2, "z": 0.9}
        assert second["tags"] == ["cloud", "B"]

    def test_byte_stable(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        render.write_events_json(sample_events(), a, seed=1)
        render.write_events_json(sample_events(), b, seed=1)
        assert a.read_bytes() == b.read_bytes()
        text = a.read_text()
        assert text.endswith("\n") and text.index('"events"') < text.index('"seed"')


def midi_messages(data, tmp_path):
    path = tmp_path / "m.mid"
    path.write_bytes(data)
    mf = mido.MidiFile(path)
    assert mf.type == 0 and mf.ticks_per_beat == 480 and len(mf.tracks) == 1
    out, tick = [], 0
    for msg in mf.tracks[0]:
        tick += msg.time
        out.append((tick, msg))
    return out


class TestMidi:
    def test_empty_file(self, tmp_path):
        msgs = midi_messages(render.midi_bytes([], 120), tmp_path)
        assert [m.type for _, m in msgs] == ["end_of_track"]

    def test_half_second_note_at_120(self, tmp_path):
        msgs = midi_messages(render.midi_bytes([NoteEvent(0.0, 0.5, 60)], 120), tmp_path)
        kinds = [(t, m.type) for t, m in msgs]
        assert kinds == [(0, "set_tempo"), (0, "note_on"), (480, "note_off"), (480, "end_of_track")]
        assert msgs[0][1].tempo == 500000
        assert msgs[1][1].velocity == 96 and msgs[1][1].note == 60

    def test_clave_onsets(self, tmp_path):
        real = rhythm.realize(rhythm.parse_template(rhythm.SON_CLAVE_16), 0.5, RngStream(0))
        evs = [NoteEvent(e.onset_seconds, 0.1, 76) for e in rhythm.events(real, 120)]
        msgs = midi_messages(render.midi_bytes(evs, 120), tmp_path)
        ons = [t for t, m in msgs if m.type == "note_on"]
        assert ons == [0, 360, 720, 1200, 1440]

    def test_sixteenth_note_ticks(self):
        # one 16th at 120 bpm is 0.125 s, i.e. 120 ticks
        assert [render.seconds_to_ticks(i * 0.125, 120) for i in (0, 3, 6, 10, 12)] == [0, 360, 720, 1200, 1440]

    def test_note_off_before_note_on_at_same_tick(self, tmp_path):
        evs = [NoteEvent(0.0, 0.5, 60), NoteEvent(0.5, 0.5, 60)]
        msgs = midi_messages(render.midi_bytes(evs, 120), tmp_path)
        at_480 = [m.type for t, m in msgs if t == 480 and m.type.startswith("note")]
        assert at_480 == ["note_off", "note_on"]

    def test_missing_pitch(self):
        with pytest.raises(ValueError):
            render.midi_bytes([NoteEvent(0.0, 0.1, None, 440.0)], 120)

    def test_bad_tempo(self):
        with pytest.raises(ValueError):
            render.midi_bytes([], 0)
