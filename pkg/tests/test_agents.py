import os
import tempfile
import unittest

from promptforge.errors import NothingToSynthesizeError, ResponseParseError

from fakes import ScriptedBackend, make_corpus
from promptforge.agents import (
    SOP,
    Critique,
    GuidanceDirective,
    Prediction,
    Prompt,
    PromptTemplate,
    classify,
    critique_false_negative,
    critique_false_positive,
    default_sop,
    extract_tagged,
    guide,
    initial_prompt,
    load_sop,
    load_template,
    parse_answer,
    role_of,
    synthesize,
)
from promptforge.gateway import ModelResponse

SOP_TEXT = default_sop()
P0 = initial_prompt("brain fog")


def actionable(note_id, kind="false_negative"):
    return Critique(note_id=note_id, error_kind=kind, text=f"Consider note {note_id}.", actionable=True)


class ConstantBackend:
    parallelism = 1

    def __init__(self, text):
        self.text = text

    def complete(self, request):
        return ModelResponse(text=self.text, backend_tag="simulated", latency=0.0)


class TestPrompt(unittest.TestCase):
    def test_initial_prompt(self):
        self.assertEqual(P0, Prompt(id="prompt-0", iteration=0, text="brain fog", origin="initial"))

    def test_initial_has_no_parent(self):
        with self.assertRaises(ValueError):
            Prompt(id="p", iteration=0, text="x", origin="initial", parent_id="q")
        with self.assertRaises(ValueError):
            Prompt(id="p", iteration=1, text="x", origin="initial")

    def test_synthesized_needs_parent(self):
        with self.assertRaises(ValueError):
            Prompt(id="p", iteration=1, text="x", origin="sensitivity_synthesis")

    def test_empty_text(self):
        with self.assertRaises(ValueError):
            initial_prompt("  ")


class TestSOP(unittest.TestCase):
    def test_default_quotes_tokens(self):
        self.assertIn('"yes"', SOP_TEXT.text)
        self.assertIn('"no"', SOP_TEXT.text)

    def test_missing_token(self):
        with self.assertRaises(ValueError):
            SOP(text='Answer "yes" if the symptom is present.')

    def test_load_sop(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, "sop.txt")
            with open(path, "w", encoding="utf-8") as wf:
                wf.write("Reply 'yes' or 'no'.\n")
            self.assertEqual(load_sop(path).text, "Reply 'yes' or 'no'.")

    def test_load_sop_invalid(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, "sop.txt")
            with open(path, "w", encoding="utf-8") as wf:
                wf.write("Classify the note.\n")
            with self.assertRaises(ValueError):
                load_sop(path)


class TestTemplates(unittest.TestCase):
    def test_every_role_template_loads(self):
        roles = {
            "specialist": "specialist",
            "improver_false_positive": "improver_false_positive",
            "improver_false_negative": "improver_false_negative",
            "summarizer_sensitivity": "summarizer_sensitivity",
            "summarizer_specificity": "summarizer_specificity",
            "guiding": "guiding",
        }
        for name, role in roles.items():
            with self.subTest(name=name):
                template = load_template(name)
                self.assertIn("user", template.sections)
                self.assertEqual(role_of(template.sections["system"]), role)

    def test_parse_sections(self):
        template = PromptTemplate.parse("t", "# comment\n[system]\nROLE: x\n{a}\n\n[user]\nhello {b}\n")
        self.assertEqual(template.sections, {"system": "ROLE: x\n{a}", "user": "hello {b}"})
        self.assertEqual(template.render("user", b="there"), "hello there")

    def test_text_before_first_section(self):
        with self.assertRaises(ValueError):
            PromptTemplate.parse("t", "stray\n[system]\nx\n")

    def test_system_section_required(self):
        with self.assertRaises(ValueError):
            PromptTemplate.parse("t", "[user]\nx\n")

    def test_missing_placeholder(self):
        with self.assertRaises(KeyError):
            load_template("specialist").render("system", sop="s")


class TestHelpers(unittest.TestCase):
    def test_role_of(self):
        self.assertEqual(role_of("ROLE: guiding\nrest"), "guiding")
        self.assertIsNone(role_of("no role here"))
        self.assertIsNone(role_of("ROLE:   \n"))

    def test_extract_tagged(self):
        self.assertEqual(extract_tagged("a <prompt>\n x \n</prompt> b", "prompt"), "x")
        self.assertEqual(extract_tagged('<critique note="n1">\ntext\n</critique>', "critique"), "text")
        self.assertIsNone(extract_tagged("<prompt>unterminated", "prompt"))
        self.assertIsNone(extract_tagged("<base_prompt>x</base_prompt>", "prompt"))


class TestParseAnswer(unittest.TestCase):
    def test_clean(self):
        self.assertEqual(parse_answer("yes"), (1, "clean"))
        self.assertEqual(parse_answer(" no\n"), (0, "clean"))

    def test_normalized(self):
        self.assertEqual(parse_answer("Yes."), (1, "normalized"))
        self.assertEqual(parse_answer("NO, the note denies it"), (0, "normalized"))
        self.assertEqual(parse_answer('"yes"'), (1, "normalized"))

    def test_ambiguous(self):
        for text in ("maybe", "", "The answer is yes", "y"):
            with self.subTest(text=text):
                self.assertEqual(parse_answer(text), (None, "defaulted"))


class TestClassify(unittest.TestCase):
    def setUp(self):
        self.dev = make_corpus(2, 2)
        self.notes = {note.id: note for note in self.dev}

    def test_prompt_and_note_reach_the_model(self):
        backend = ScriptedBackend([self.dev], positives={"brain fog": ["p0"]})
        self.assertEqual(classify(P0, SOP_TEXT, self.notes["p0"], backend).label, 1)
        self.assertEqual(classify(P0, SOP_TEXT, self.notes["p1"], backend).label, 0)
        request = backend.requests_for("specialist")[0]
        self.assertIn(SOP_TEXT.text, request.system_text)
        self.assertEqual(request.temperature, 0.0)

    def test_clean(self):
        backend = ScriptedBackend([self.dev], positives={}, answers={"n0": "no"})
        self.assertEqual(
            classify(P0, SOP_TEXT, self.notes["n0"], backend),
            Prediction(note_id="n0", label=0, raw_text="no", parse_status="clean"),
        )

    def test_retry_after_ambiguous(self):
        backend = ScriptedBackend([self.dev], positives={}, answers={"p0": ["maybe", "Yes!"]})
        prediction = classify(P0, SOP_TEXT, self.notes["p0"], backend)
        self.assertEqual((prediction.label, prediction.parse_status), (1, "retried"))
        first, second = backend.requests_for("specialist")
        self.assertTrue(second.user_text.startswith(first.user_text))
        self.assertIn("exactly one word", second.user_text)

    def test_defaults_to_negative(self):
        backend = ScriptedBackend([self.dev], positives={}, answers={"p1": "unsure"})
        with self.assertLogs("promptforge.agents", level="WARNING"):
            prediction = classify(P0, SOP_TEXT, self.notes["p1"], backend)
        self.assertEqual((prediction.label, prediction.parse_status), (0, "defaulted"))
        self.assertEqual(len(backend.requests_for("specialist")), 2)

    def test_defaulted_prediction_must_be_negative(self):
        with self.assertRaises(ValueError):
            Prediction(note_id="x", label=1, raw_text="?", parse_status="defaulted")


class TestCritique(unittest.TestCase):
    def setUp(self):
        self.dev = make_corpus(1, 1)
        self.notes = {note.id: note for note in self.dev}

    def test_false_negative(self):
        backend = ScriptedBackend([self.dev], positives={})
        critique = critique_false_negative(P0, SOP_TEXT, self.notes["p0"], backend)
        self.assertEqual(critique.error_kind, "false_negative")
        self.assertTrue(critique.actionable)
        self.assertEqual(backend.roles(), ["improver_false_negative"])
        self.assertIn("<note>\ndev positive note 0\n</note>", backend.calls[0][1].user_text)

    def test_false_positive_non_actionable(self):
        backend = ScriptedBackend([self.dev], positives={}, non_actionable=["n0"])
        critique = critique_false_positive(P0, SOP_TEXT, self.notes["n0"], backend)
        self.assertEqual(critique.error_kind, "false_positive")
        self.assertFalse(critique.actionable)
        self.assertEqual(backend.roles(), ["improver_false_positive"])

    def test_marker_must_lead(self):
        backend = ConstantBackend("The prompt ignores negation.\nNO_ACTIONABLE_CRITIQUE")
        self.assertTrue(critique_false_positive(P0, SOP_TEXT, self.notes["n0"], backend).actionable)
        backend = ConstantBackend("\n  NO_ACTIONABLE_CRITIQUE  \n")
        self.assertFalse(critique_false_positive(P0, SOP_TEXT, self.notes["n0"], backend).actionable)


class TestSynthesize(unittest.TestCase):
    def setUp(self):
        self.dev = make_corpus(2, 2)

    def test_sensitivity(self):
        backend = ScriptedBackend([self.dev], positives={}, prompts=["brain fog, mental fatigue"])
        prompt = synthesize([actionable("p0"), actionable("p1")], P0, SOP_TEXT, "sensitivity", backend)
        self.assertEqual(
            prompt,
            Prompt(
                id="prompt-1",
                iteration=1,
                text="brain fog, mental fatigue",
                origin="sensitivity_synthesis",
                parent_id="prompt-0",
            ),
        )
        (request,) = backend.requests_for("summarizer_sensitivity")
        self.assertEqual(extract_tagged(request.user_text, "base_prompt"), "brain fog")
        self.assertIn('<critique note="p0">', request.user_text)
        self.assertIn('<critique note="p1">', request.user_text)
        self.assertNotIn("<failed_prompt>", request.user_text)
        self.assertNotIn("<guidance>", request.user_text)

    def test_specificity(self):
        backend = ScriptedBackend([self.dev], positives={}, prompts=["brain fog, not denied"])
        prompt = synthesize([actionable("n0", "false_positive")], P0, SOP_TEXT, "specificity", backend)
        self.assertEqual(prompt.origin, "specificity_synthesis")
        self.assertEqual(backend.roles(), ["summarizer_specificity"])

    def test_revert_shows_failed_example(self):
        base = Prompt("prompt-1", 1, "P1", "sensitivity_synthesis", parent_id="prompt-0")
        failed = Prompt("prompt-2", 2, "P2", "sensitivity_synthesis", parent_id="prompt-1")
        backend = ScriptedBackend([self.dev], positives={}, prompts=["P3"])
        prompt = synthesize(
            [actionable("p0")], base, SOP_TEXT, "sensitivity", backend, failed_example=failed, iteration=3
        )
        self.assertEqual((prompt.id, prompt.iteration), ("prompt-3", 3))
        self.assertEqual(prompt.origin, "revert_synthesis")
        self.assertEqual(prompt.parent_id, "prompt-1")
        (request,) = backend.requests_for("summarizer_sensitivity")
        self.assertEqual(extract_tagged(request.user_text, "failed_prompt"), "P2")
        self.assertEqual(extract_tagged(request.user_text, "base_prompt"), "P1")

    def test_guidance_passed_along(self):
        backend = ScriptedBackend([self.dev], positives={}, prompts=["P1"])
        directive = GuidanceDirective(kind="rewrite_strategy", text="Focus on paraphrases.", triggered_at=2)
        synthesize([actionable("p0")], P0, SOP_TEXT, "sensitivity", backend, guidance=directive)
        (request,) = backend.requests_for("summarizer_sensitivity")
        self.assertEqual(extract_tagged(request.user_text, "guidance"), "Focus on paraphrases.")

    def test_untagged_reply_used_whole(self):
        backend = ConstantBackend("  brain fog or cognitive slowing \n")
        prompt = synthesize([actionable("p0")], P0, SOP_TEXT, "sensitivity", backend)
        self.assertEqual(prompt.text, "brain fog or cognitive slowing")

    def test_empty_reply(self):
        with self.assertRaises(ResponseParseError):
            synthesize([actionable("p0")], P0, SOP_TEXT, "sensitivity", ConstantBackend("<prompt> </prompt>"))

    def test_nothing_to_synthesize(self):
        backend = ScriptedBackend([self.dev], positives={})
        with self.assertRaises(NothingToSynthesizeError):
            synthesize([], P0, SOP_TEXT, "sensitivity", backend)
        self.assertEqual(backend.calls, [])

    def test_rejects_filtered_or_mismatched_critiques(self):
        backend = ScriptedBackend([self.dev], positives={})
        filtered = Critique("p0", "false_negative", "NO_ACTIONABLE_CRITIQUE", actionable=False)
        with self.assertRaises(ValueError):
            synthesize([filtered], P0, SOP_TEXT, "sensitivity", backend)
        with self.assertRaises(ValueError):
            synthesize([actionable("n0", "false_positive")], P0, SOP_TEXT, "sensitivity", backend)
        with self.assertRaises(ValueError):
            synthesize([actionable("p0")], P0, SOP_TEXT, "recall", backend)


class TestGuide(unittest.TestCase):
    def setUp(self):
        self.dev = make_corpus(1, 1)

    def test_switch_directive(self):
        backend = ScriptedBackend([self.dev], positives={}, directives=["DIRECTIVE: switch_target_metric"])
        directive = guide([0.5, 0.6, 0.4], "sensitivity", P0, SOP_TEXT, backend)
        self.assertEqual(directive.kind, "switch_target_metric")
        self.assertEqual(directive.triggered_at, 3)
        (request,) = backend.requests_for("guiding")
        self.assertIn("iteration 2: dev F1 0.4000", request.user_text)
        self.assertIn("Current target metric: sensitivity", request.user_text)

    def test_rewrite_directive_text(self):
        reply = "DIRECTIVE: rewrite_strategy\nDescribe functional impact instead of listing synonyms."
        backend = ScriptedBackend([self.dev], positives={}, directives=[reply])
        directive = guide([0.5, 0.5], "specificity", P0, SOP_TEXT, backend)
        self.assertEqual(directive.kind, "rewrite_strategy")
        self.assertEqual(directive.text, "Describe functional impact instead of listing synonyms.")
        self.assertEqual(directive.triggered_at, 2)

    def test_unparseable_reply_is_rewrite(self):
        directive = guide([0.5, 0.5], "sensitivity", P0, SOP_TEXT, ConstantBackend("Try something else."))
        self.assertEqual(directive.kind, "rewrite_strategy")
        self.assertEqual(directive.text, "Try something else.")

    def test_requires_history(self):
        with self.assertRaises(ValueError):
            guide([0.5], "sensitivity", P0, SOP_TEXT, ConstantBackend("x"))

    def test_only_after_non_improvement(self):
        with self.assertRaises(ValueError):
            guide([0.5, 0.6], "sensitivity", P0, SOP_TEXT, ConstantBackend("x"))

    def test_unknown_kind(self):
        with self.assertRaises(ValueError):
            GuidanceDirective(kind="give_up", text="x", triggered_at=2)
