import os
import tempfile
import unittest

import numpy as np

from promptforge.errors import UnknownRoleError

from promptforge.agents import (
    Critique,
    Prompt,
    classify,
    default_sop,
    guide,
    initial_prompt,
    synthesize,
)
from promptforge.dataset import TERM_MODELS
from promptforge.gateway import SimulatedBackend
from promptforge.metrics import selection_f1
from promptforge.simlab import (
    SimParams,
    apply_synthesis_step,
    boundary_of,
    build_world,
    run_instability_experiment,
    run_simulated_pipeline,
    sim_prompt_text,
)

SOP = default_sop()


class TestSimParams(unittest.TestCase):
    def test_defaults(self):
        params = SimParams()
        self.assertEqual(params.initial_boundary, 1.0)

    def test_invalid(self):
        for kwargs in ({"separation": 0}, {"step_gain": -1}, {"noise_scale": -0.1}, {"clamp": -1}):
            with self.subTest(kwargs=kwargs):
                with self.assertRaises(ValueError):
                    SimParams(**kwargs)


class TestBoundaryText(unittest.TestCase):
    def test_encoded_boundary(self):
        text = sim_prompt_text("brain fog", "sensitivity", -0.25)
        self.assertTrue(text.startswith("brain fog\n"))
        self.assertEqual(boundary_of(text, 1.1), -0.25)
        self.assertEqual(boundary_of(sim_prompt_text("brain fog", "specificity", 2.5), 0.0), 2.5)

    def test_bare_term_uses_default(self):
        self.assertEqual(boundary_of("brain fog", 1.1), 1.1)


class TestBuildWorld(unittest.TestCase):
    def test_splits(self):
        world = build_world(400, 0.03, seed=0)
        self.assertEqual((len(world.dev), len(world.val)), (200, 200))
        self.assertEqual(world.dev.positives + world.val.positives, 12)
        self.assertEqual((world.dev.split, world.val.split), ("dev", "val"))
        self.assertEqual(world.boundary, 1.0)

    def test_deterministic(self):
        first, second = build_world(100, 0.1, seed=4), build_world(100, 0.1, seed=4)
        self.assertEqual(first.dev, second.dev)
        self.assertEqual(first.scores, second.scores)
        self.assertNotEqual(first.scores, build_world(100, 0.1, seed=5).scores)

    def test_score_separation(self):
        world = build_world(400, 0.23, seed=1)
        notes = (*world.dev.notes, *world.val.notes)
        positives = [world.scores[note.text] for note in notes if note.label == 1]
        negatives = [world.scores[note.text] for note in notes if note.label == 0]
        self.assertGreater(np.mean(positives) - np.mean(negatives), 1.5)

    def test_invalid_size(self):
        for n in (3, 101, 2):
            with self.subTest(n=n):
                with self.assertRaises(ValueError):
                    build_world(n, 0.1, seed=0)

    def test_invalid_prevalence(self):
        with self.assertRaises(ValueError):
            build_world(100, 1.0, seed=0)

    def test_unknown_note(self):
        world = build_world(40, 0.1, seed=0)
        with self.assertRaises(ValueError):
            world.score_of("not a simulated note")


class TestSynthesisStep(unittest.TestCase):
    def setUp(self):
        self.world = build_world(40, 0.25, seed=0, params=SimParams(noise_scale=0.0))

    def test_sensitivity_lowers(self):
        boundary = apply_synthesis_step(self.world, "sensitivity", error_count=3, class_count=6)
        self.assertAlmostEqual(boundary, 1.0 - 0.75)
        self.assertEqual(self.world.boundary, boundary)

    def test_specificity_raises(self):
        boundary = apply_synthesis_step(self.world, "specificity", error_count=2, class_count=10)
        self.assertAlmostEqual(boundary, 1.0 + 0.3)

    def test_steps_grow_as_class_shrinks(self):
        params = SimParams(noise_scale=0.0)
        small = apply_synthesis_step(build_world(40, 0.25, 0, params), "specificity", 4, 40)
        large = apply_synthesis_step(build_world(40, 0.25, 0, params), "specificity", 4, 4)
        self.assertLess(small - 1.0, large - 1.0)

    def test_clamped(self):
        self.assertEqual(apply_synthesis_step(self.world, "sensitivity", 100, 1), -3.0)
        self.assertAlmostEqual(apply_synthesis_step(self.world, "specificity", 1000, 1), 5.0)

    def test_invalid(self):
        with self.assertRaises(ValueError):
            apply_synthesis_step(self.world, "sensitivity", 1, 0)
        with self.assertRaises(ValueError):
            apply_synthesis_step(self.world, "sensitivity", -1, 5)
        with self.assertRaises(ValueError):
            apply_synthesis_step(self.world, "recall", 1, 5)


class TestWorldAgents(unittest.TestCase):
    def setUp(self):
        self.world = build_world(60, 0.2, seed=3, params=SimParams(noise_scale=0.0))
        self.backend = SimulatedBackend(self.world)
        self.p0 = initial_prompt("brain fog")

    def test_specialist_follows_boundary(self):
        for note in self.world.dev:
            with self.subTest(note=note.id):
                prediction = classify(self.p0, SOP, note, self.backend)
                self.assertEqual(prediction.label, self.world.predict(note.text, 1.0))
                self.assertEqual(prediction.parse_status, "clean")

    def test_sensitivity_synthesis_moves_boundary_down(self):
        critiques = [
            Critique(note_id=f"c{i}", error_kind="false_negative", text="Missed.", actionable=True)
            for i in range(2)
        ]
        prompt = synthesize(critiques, self.p0, SOP, "sensitivity", self.backend)
        expected = 1.0 - 1.5 * 2 / self.world.dev.positives
        self.assertAlmostEqual(boundary_of(prompt.text, 1.1), expected, places=5)
        self.assertEqual(prompt.origin, "sensitivity_synthesis")

    def test_synthesis_starts_from_base_prompt(self):
        base_text = sim_prompt_text("brain fog", "specificity", 2.0)
        critiques = [Critique(note_id="c0", error_kind="false_positive", text="Flagged.", actionable=True)]
        base = Prompt(
            id="prompt-1", iteration=1, text=base_text, origin="specificity_synthesis", parent_id="prompt-0"
        )
        prompt = synthesize(critiques, base, SOP, "specificity", self.backend)
        expected = 2.0 + 1.5 / self.world.dev.positives
        self.assertAlmostEqual(boundary_of(prompt.text, 1.1), expected, places=5)

    def test_guiding(self):
        self.assertEqual(
            guide([0.5, 0.0], "sensitivity", self.p0, SOP, self.backend).kind, "rewrite_strategy"
        )
        self.assertEqual(
            guide([0.5, 0.5], "sensitivity", self.p0, SOP, self.backend).kind, "switch_target_metric"
        )

    def test_improver_names_family(self):
        model = TERM_MODELS["brain fog"]
        positive = next(note for note in self.world.dev if note.label == 1)
        text = self.world.respond(
            "ROLE: improver_false_negative\n...", f"<note>\n{positive.text}\n</note>"
        )
        family = model.family_of(positive.text)
        self.assertIn(family.replace("_", " "), text)

    def test_unknown_role(self):
        with self.assertRaises(UnknownRoleError):
            self.world.respond("ROLE: critic\n", "<note>\nx\n</note>")


class TestSimulatedPipeline(unittest.TestCase):
    def test_deterministic(self):
        first = run_simulated_pipeline(0.1, 3, n=100, t_max=3)
        second = run_simulated_pipeline(0.1, 3, n=100, t_max=3)
        self.assertEqual(first, second)

    def test_trace_shape(self):
        trace = run_simulated_pipeline(0.1, 2, n=100, t_max=3)
        self.assertLessEqual(len(trace.rows), 4)
        self.assertEqual([row.t for row in trace.rows], list(range(len(trace.rows))))
        self.assertEqual(trace.rows[0].boundary, 1.0)
        self.assertTrue(0 <= trace.selected_index < len(trace.rows))
        self.assertGreaterEqual(trace.oscillation_amplitude, 0.0)

    def test_selection_skips_development_collapse(self):
        for seed in range(20):
            trace = run_simulated_pipeline(0.03, seed, n=400, t_max=7)
            dev_f1 = [selection_f1(row.dev) for row in trace.rows]
            with self.subTest(seed=seed):
                self.assertEqual(dev_f1[trace.selected_index], max(dev_f1))
                if max(dev_f1) > 0:
                    self.assertNotIn(trace.selected_index, trace.dev_collapse_iterations)

    def test_trace_csv(self):
        trace = run_simulated_pipeline(0.1, 2, n=100, t_max=2)
        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, "trace.csv")
            trace.to_csv(path)
            with open(path, encoding="utf-8") as rf:
                lines = rf.read().splitlines()
        self.assertTrue(lines[0].startswith("iteration,boundary,dev_sensitivity"))
        self.assertEqual(len(lines), len(trace.rows) + 1)
        self.assertTrue(lines[1].startswith("0,+1.000000,"))


class TestInstabilityExperiment(unittest.TestCase):
    def test_instability_falls_with_prevalence(self):
        prevalences = (0.03, 0.12, 0.23)
        summary = run_instability_experiment(list(prevalences), seeds=50, n=400, t_max=7)
        rows = [summary.row_for(p) for p in prevalences]
        amplitudes = [row.mean_amplitude for row in rows]
        self.assertGreater(amplitudes[0], amplitudes[1])
        self.assertGreater(amplitudes[1], amplitudes[2])
        self.assertGreaterEqual(rows[0].collapse_frequency, 0.6)
        self.assertEqual(rows[2].collapse_frequency, 0.0)
        for row in rows:
            with self.subTest(prevalence=row.prevalence):
                self.assertEqual(row.seeds, 50)
                self.assertGreaterEqual(row.mean_selected_val_f1, row.mean_final_val_f1)
        self.assertEqual(len(summary.traces), 150)

    def test_workers_do_not_change_results(self):
        sequential = run_instability_experiment([0.1, 0.2], seeds=2, n=40, t_max=2)
        parallel = run_instability_experiment([0.1, 0.2], seeds=2, n=40, t_max=2, workers=2)
        self.assertEqual(sequential.rows, parallel.rows)

    def test_summary_csv(self):
        summary = run_instability_experiment([0.1], seeds=1, n=40, t_max=1)
        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, "summary.csv")
            summary.to_csv(path)
            with open(path, encoding="utf-8") as rf:
                lines = rf.read().splitlines()
        self.assertEqual(
            lines[0],
            "prevalence,seeds,mean_amplitude,collapse_frequency,mean_final_val_f1,mean_selected_val_f1",
        )
        self.assertTrue(lines[1].startswith("0.1,1,"))

    def test_invalid(self):
        with self.assertRaises(ValueError):
            run_instability_experiment([], seeds=1)
        with self.assertRaises(ValueError):
            run_instability_experiment([0.1], seeds=0)
        with self.assertRaises(ValueError):
            run_instability_experiment([0.1], seeds=1, workers=0)

    def test_unknown_prevalence(self):
        summary = run_instability_experiment([0.1], seeds=1, n=40, t_max=1)
        with self.assertRaises(KeyError):
            summary.row_for(0.5)
