import math

import pytest

from qmuse import harmony
from qmuse.harmony import BDIM7, CMAJ, RAMP_SCHEDULE, Chord, CloudSpec, CrossfadeSchedule, HarmonyError
from qmuse.rng import RngStream

from conftest import GOLDEN_SEED, binomial_sigma


class TestNoteNames:
    def test_bdim7_from_names(self):
        assert Chord.from_names("B,D,F,Ab").pitch_classes == {11, 2, 5, 8} == BDIM7.pitch_classes

    def test_cmaj_from_names(self):
        assert Chord.from_names(["C", "E", "G"]).pitch_classes == CMAJ.pitch_classes

    @pytest.mark.parametrize("name,pc", [("C#", 1), ("Db", 1), ("Cb", 11), ("B#", 0), ("e", 4), ("Bbb", 9)])
    def test_accidentals(self, name, pc):
        assert harmony.parse_note_name(name) == pc

    @pytest.mark.parametrize("name", ["H", "", "C$", "Ab7"])
    def test_unknown_names(self, name):
        with pytest.raises(HarmonyError):
            harmony.parse_note_name(name)

    def test_empty_chord(self):
        with pytest.raises(HarmonyError):
            Chord("none", frozenset())
        with pytest.raises(HarmonyError):
            Chord("bad", frozenset({12}))


class TestSchedule:
    def test_ramp_holds_chord_a(self):
        assert harmony.probability_at(RAMP_SCHEDULE, 0.25) == 0

    def test_ramp_midpoint(self):
        assert harmony.probability_at(RAMP_SCHEDULE, 1.0) == pytest.approx(0.5)

    def test_ramp_holds_chord_b(self):
        assert harmony.probability_at(RAMP_SCHEDULE, 1.75) == 1

    def test_constant_extension(self):
        s = CrossfadeSchedule(((1.0, 0.2), (2.0, 0.6)))
        assert harmony.probability_at(s, -5) == 0.2
        assert harmony.probability_at(s, 50) == 0.6

    def test_step_at_repeated_time(self):
        s = CrossfadeSchedule(((0, 0), (1, 0), (1, 1), (2, 1)))
        assert harmony.probability_at(s, 0.999) == pytest.approx(0)
        assert harmony.probability_at(s, 1.001) == pytest.approx(1)

    def test_parse(self):
        assert CrossfadeSchedule.parse("0:0,0.5:0,1.5:1,2:1") == RAMP_SCHEDULE

    @pytest.mark.parametrize("bps", [(), ((0, 1.5),), ((1, 0), (0, 1)), ((math.nan, 0.5),)])
    def test_invalid(self, bps):
        with pytest.raises(HarmonyError):
            CrossfadeSchedule(bps)

    @pytest.mark.parametrize("text", ["0-1", "a:b", "0:0:1"])
    def test_bad_text(self, text):
        with pytest.raises(HarmonyError):
            CrossfadeSchedule.parse(text)


class TestChooseChord:
    def test_endpoints(self, rng):
        assert {harmony.choose_chord(0.0, rng.derive("c", i)) for i in range(200)} == {"A"}
        assert {harmony.choose_chord(1.0, rng.derive("c", i)) for i in range(200)} == {"B"}

    def test_even_odds(self):
        base = RngStream(GOLDEN_SEED, "even")
        b = sum(harmony.choose_chord(0.5, base.derive("n", i)) == "B" for i in range(10_000))
        assert abs(b / 10_000 - 0.5) <= 0.015

    @pytest.mark.parametrize("p", [-0.1, 1.1])
    def test_invalid_p(self, p, rng):
        with pytest.raises(ValueError):
            harmony.choose_chord(p, rng)


class TestRegister:
    def test_cmaj_octave(self):
        assert harmony.chord_tones_in_range(CMAJ, 60, 72) == [60, 64, 67, 72]

    def test_single_b(self):
        assert harmony.chord_tones_in_range(BDIM7, 59, 59) == [59]

    def test_empty(self):
        with pytest.raises(HarmonyError):
            harmony.chord_tones_in_range(CMAJ, 61, 63)

    @pytest.mark.parametrize("lo,hi", [(72, 60), (-1, 10), (0, 128)])
    def test_bad_range(self, lo, hi):
        with pytest.raises(HarmonyError):
            harmony.chord_tones_in_range(CMAJ, lo, hi)

    def test_single_tone_register(self, rng):
        assert {harmony.choose_pitch(BDIM7, (59, 59), rng) for _ in range(50)} == {59}

    def test_uniform_pitch_choice(self):
        base = RngStream(GOLDEN_SEED, "pitch")
        counts = dict.fromkeys([60, 64, 67, 72], 0)
        for i in range(10_000):
            counts[harmony.choose_pitch(CMAJ, (60, 72), base.derive("n", i))] += 1
        for c in counts.values():
            assert abs(c / 10_000 - 0.25) <= 0.013

    def test_out_of_order_register(self, rng):
        with pytest.raises(HarmonyError):
            harmony.choose_pitch(CMAJ, (72, 60), rng)


def ramp_cloud(rate=16.0, seed=GOLDEN_SEED):
    spec = CloudSpec(BDIM7, CMAJ, RAMP_SCHEDULE, 2.0, rate)
    return spec, harmony.generate_cloud(spec, RngStream(seed, "cloud"))


class TestCloud:
    def test_thirty_two_notes(self):
        spec, notes = ramp_cloud()
        assert len(notes) == 32
        assert [n.onset_s for n in notes] == [i / 16 for i in range(32)]
        assert spec.note_length_s == pytest.approx(2 / 16)

    def test_all_zero_schedule(self):
        spec = CloudSpec(BDIM7, CMAJ, CrossfadeSchedule.constant(0.0), 2.0)
        notes = harmony.generate_cloud(spec, RngStream(1, "zero"))
        assert all(n.chord_tag == "A" and n.midi_note % 12 in BDIM7.pitch_classes for n in notes)

    def test_membership(self):
        for seed in range(20):
            spec = CloudSpec(BDIM7, CMAJ, CrossfadeSchedule.constant(0.5), 1.0, 64)
            for n in harmony.generate_cloud(spec, RngStream(seed, "member")):
                chord = BDIM7 if n.chord_tag == "A" else CMAJ
                assert n.midi_note % 12 in chord.pitch_classes
                assert 48 <= n.midi_note <= 84

    def test_deterministic(self):
        assert ramp_cloud(seed=4)[1] == ramp_cloud(seed=4)[1]
        assert ramp_cloud(seed=4)[1] != ramp_cloud(seed=5)[1]

    def test_register_must_hold_both_chords(self):
        with pytest.raises(HarmonyError):
            CloudSpec(BDIM7, CMAJ, RAMP_SCHEDULE, 2.0, register=(59, 59))

    def test_note_count_tolerates_float_noise(self):
        assert CloudSpec(BDIM7, CMAJ, RAMP_SCHEDULE, 0.3, 10).note_count == 3

    def test_crossfade_tracks_schedule(self):
        spec, notes = ramp_cloud(rate=10_000)
        assert len(notes) == 20_000
        for b in range(20):
            bucket = [n for n in notes if b * 0.1 <= n.onset_s < (b + 1) * 0.1 - 1e-12]
            ps = [harmony.probability_at(spec.schedule, n.onset_s) for n in bucket]
            k = sum(n.chord_tag == "B" for n in bucket)
            mean = sum(ps)
            sd = math.sqrt(sum(p * (1 - p) for p in ps))
            assert abs(k - mean) <= 3 * sd, f"bin {b}"
            if (b + 1) * 0.1 <= 0.5 + 1e-9:
                assert k == 0
            if b * 0.1 >= 1.5 - 1e-9:
                assert k == len(bucket)

    def test_even_blend(self):
        spec = CloudSpec(BDIM7, CMAJ, CrossfadeSchedule.constant(0.5), 2.0, 2000)
        notes = harmony.generate_cloud(spec, RngStream(GOLDEN_SEED, "blend"))
        assert abs(harmony.b_fraction(notes) - 0.5) <= 3 * binomial_sigma(0.5, len(notes))
