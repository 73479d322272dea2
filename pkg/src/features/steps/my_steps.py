from behave import given, when, then

from app import cmd_analyze, cmd_reproduce, load_example_cases
from core_types import Equilibrium, ParamSet


@given('the example table is loaded')
def step_impl(context):
  context.cases = load_example_cases()


@when('I reproduce example "{example_id}"')
def step_impl(context, example_id):
  context.result = cmd_reproduce(example_id, cases=context.cases)
  context.verdict = context.result.analysis.verdict


@then('the computed verdict is "{label}"')
def step_impl(context, label):
  assert context.verdict.kind.label == label, f"expected {label}, got {context.verdict.kind.label}"


@then('the result is "{outcome}"')
def step_impl(context, outcome):
  assert context.result.match == (outcome == "MATCH")
  assert f"result: {outcome}" in context.result.text


@given('parameters a={a:g} b={b:g} c1={c1:g} c2={c2:g} c3={c3:g}')
def step_impl(context, a, b, c1, c2, c3):
  context.params = (a, b, c1, c2, c3)


@when('I analyze the equilibrium k={k:g} m={m:g} at order {q:g}')
def step_impl(context, k, m, q):
  context.report = cmd_analyze(ParamSet(*context.params, q), Equilibrium(k, m), q)
  context.verdict = context.report.verdict


@then('both eigenvalue routes agree')
def step_impl(context):
  assert context.report.routes_agree
