#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "llmpa/prediction.hpp"

using namespace llmpa;

namespace {

Section section_named(const std::string& text, double y = 0) {
  Section s;
  s.box = BoundingBox{0, y, 100, 20};
  s.member_node_ids = {"n"};
  s.member_texts = {text};
  s.representative_text = text;
  return s;
}

CandidateSet candidates_of(std::vector<std::string> texts,
                           size_t max_size = 50) {
  return build_candidates_from_texts(texts, "task", {}, max_size);
}

PromptBundle bundle_with(std::vector<std::string> texts) {
  PromptBundle b;
  b.task = "task";
  b.page_digest = "digest";
  b.candidates = candidates_of(std::move(texts));
  return b;
}

}  // namespace

TEST_CASE("build_candidates: section texts in order") {
  std::vector<Section> sections{section_named("Transport", 0),
                                section_named("Search", 30)};
  CandidateSet set = build_candidates(sections, "book flight", {}, 50);
  REQUIRE(set.entries.size() == 2);
  CHECK(set.entries[0].display_text == "Transport");
  CHECK(set.entries[0].source == CandidateSource::page_sections);
  CHECK(set.entries[1].display_text == "Search");
}

TEST_CASE("build_candidates: merge order and dedup keeps first") {
  std::vector<Section> sections{section_named("Confirm", 0),
                                section_named("Cancel", 30)};
  CandidateSet set = build_candidates(sections, "task", {"Confirm"}, 50);
  REQUIRE(set.entries.size() == 2);
  CHECK(set.entries[0].display_text == "Confirm");
  CHECK(set.entries[0].source == CandidateSource::history_top);
  CHECK(set.entries[1].display_text == "Cancel");
  CHECK(set.entries[1].source == CandidateSource::page_sections);
}

TEST_CASE("build_candidates: quoted task phrases become candidates") {
  std::vector<Section> sections{section_named("Search", 0)};
  CandidateSet set =
      build_candidates(sections, "type 'subway ticket coupon' and go", {}, 50);
  REQUIRE(set.entries.size() == 2);
  CHECK(set.entries[0].display_text == "subway ticket coupon");
  CHECK(set.entries[0].source == CandidateSource::task_text);
}

TEST_CASE("build_candidates: truncation to max_size keeps order") {
  std::vector<std::string> texts;
  for (int i = 0; i < 60; ++i) texts.push_back("t" + std::to_string(i));
  CandidateSet set = build_candidates_from_texts(texts, "task", {}, 50);
  CHECK(set.entries.size() == 50);
  CHECK(set.entries[0].display_text == "t0");
  CHECK(set.entries[49].display_text == "t49");
}

TEST_CASE("build_candidates: empty merge is an error") {
  CHECK_THROWS_AS(build_candidates({}, "no quotes here", {}, 50),
                  EmptyCandidatesError);
}

TEST_CASE("assemble_prompt: empty history marker and numbered candidates") {
  PromptBundle b = bundle_with({"Transport", "Search"});
  std::string prompt = assemble_prompt(b);
  CHECK(prompt.find("HISTORY:\n(none)") != std::string::npos);
  CHECK(prompt.find("1. Transport\n2. Search") != std::string::npos);
  CHECK(prompt.find("TASK:\ntask") == 0);
  // Byte-identical for identical bundles.
  CHECK(assemble_prompt(b) == prompt);
}

TEST_CASE("assemble_prompt: section order TASK PLAN HISTORY PAGE CANDIDATES "
          "INSTRUCTION") {
  PromptBundle b = bundle_with({"A"});
  b.chain_remaining = {"step one"};
  b.step_key = "t/p/h0";
  std::string prompt = assemble_prompt(b);
  size_t task = prompt.find("TASK:");
  size_t plan = prompt.find("PLAN:");
  size_t history = prompt.find("HISTORY:");
  size_t page = prompt.find("PAGE:");
  size_t cands = prompt.find("CANDIDATES:");
  size_t instr = prompt.find("INSTRUCTION:");
  size_t key = prompt.find("STEP_KEY: t/p/h0");
  REQUIRE(task != std::string::npos);
  CHECK(task < plan);
  CHECK(plan < history);
  CHECK(history < page);
  CHECK(page < cands);
  CHECK(cands < instr);
  CHECK(instr < key);
}

TEST_CASE("assemble_prompt: icpad-off bundles omit PLAN and HISTORY") {
  PromptBundle b = bundle_with({"A"});
  b.include_plan = false;
  b.include_history = false;
  std::string prompt = assemble_prompt(b);
  CHECK(prompt.find("PLAN:") == std::string::npos);
  CHECK(prompt.find("HISTORY:") == std::string::npos);
  CHECK(prompt.find("PAGE:") != std::string::npos);
}

TEST_CASE("assemble_prompt: golden file") {
  PromptBundle b;
  b.task = "Book an economy class flight ticket from Hangzhou to Beijing on "
           "November 4th";
  b.chain_remaining = {"Set the date to November 4th",
                       "Select the 'Economy' class flight"};
  b.history_actions = {Action::click("Transport"),
                       Action::type("input departure city", "Hangzhou")};
  b.history_descriptions = {
      "Clicked 'Transport' on page homepage; page changed to search.",
      "Typed 'input departure city' with value 'Hangzhou' on page search; "
      "page did not change."};
  b.page_digest =
      "Select date\nNovember 4th ¥400\nNovember 5th ¥520";
  b.candidates = build_candidates_from_texts(
      {"Select date", "November 4th", "November 5th"}, b.task, {}, 50);
  b.step_key = "flight_hz_bj/date/h2";

  std::ifstream in(std::string(LLMPA_FIXTURE_DIR) +
                   "/golden/prompt_flight_date.txt");
  REQUIRE(in);
  std::ostringstream golden;
  golden << in.rdbuf();
  CHECK(assemble_prompt(b) == golden.str());
}

TEST_CASE("assemble_prompt: over budget drops the oldest history pair first") {
  PromptBundle b = bundle_with({"A", "B"});
  for (int i = 0; i < 6; ++i) {
    b.history_actions.push_back(
        Action::click("history-element-" + std::to_string(i)));
    b.history_descriptions.push_back(
        "Clicked 'history-element-" + std::to_string(i) +
        "' on page p; page did not change.");
  }
  std::string full = assemble_prompt(b);
  REQUIRE(full.find("history-element-0") != std::string::npos);

  b.budget = full.size() - 40;
  std::string evicted = assemble_prompt(b);
  CHECK(evicted.size() <= b.budget);
  CHECK(evicted.find("history-element-0") == std::string::npos);
  CHECK(evicted.find("history-element-5") != std::string::npos);
  CHECK(evicted.find("CANDIDATES:") != std::string::npos);
}

TEST_CASE("assemble_prompt: budget respected under fuzzing") {
  std::mt19937 rng(37);
  std::uniform_int_distribution<int> hist(0, 8), digest_len(0, 3000);
  for (int round = 0; round < 100; ++round) {
    PromptBundle b = bundle_with({"A", "B"});
    int n = hist(rng);
    for (int i = 0; i < n; ++i) {
      b.history_actions.push_back(Action::click("e" + std::to_string(i)));
      b.history_descriptions.push_back(std::string(200, 'x'));
    }
    b.page_digest = std::string(digest_len(rng), 'd');
    b.budget = 600;
    CHECK(assemble_prompt(b).size() <= b.budget);
  }
}

TEST_CASE("parse_action_reply: grammar examples") {
  CandidateSet set = candidates_of({"Transport", "Search"});
  Action a = parse_action_reply("CLICK 2", set);
  CHECK(a.function() == ActionFunction::click);
  CHECK(a.element() == "Search");

  CandidateSet dep = candidates_of({"departure city"});
  Action t = parse_action_reply("TYPE 1 :: Hangzhou", dep);
  CHECK(t.function() == ActionFunction::type);
  CHECK(t.element() == "departure city");
  CHECK(t.value() == "Hangzhou");

  CandidateSet now = candidates_of({"Exchange Now"});
  CHECK_THROWS_AS(parse_action_reply("CLICK Exchange Rights", now),
                  HallucinationError);

  Action s = parse_action_reply("SCROLL PAGE", set);
  CHECK(s.element() == "PAGE");

  CHECK_THROWS_AS(parse_action_reply("TAP Transport", set), FormatError);
  CHECK_THROWS_AS(parse_action_reply("TYPE 1 Hangzhou", dep), FormatError);
  CHECK_THROWS_AS(parse_action_reply("TYPE 1 ::", dep), FormatError);
  CHECK_THROWS_AS(parse_action_reply("CLICK 7", set), HallucinationError);
  CHECK_THROWS_AS(parse_action_reply("CLICK 0", set), HallucinationError);
  CHECK(parse_action_reply("CLICK Transport", set).element() == "Transport");
  CHECK(parse_action_reply("  CLICK 1  ", set).element() == "Transport");
}

TEST_CASE("parse_action_reply: never yields an element outside the set") {
  std::mt19937 rng(41);
  const char* fns[] = {"CLICK", "SCROLL", "TYPE", "TAP", "click"};
  const char* els[] = {"Transport", "Search", "Exchange Rights", "PAGE", "3",
                       "0", "99", "", "Confirm pay"};
  std::uniform_int_distribution<int> fn(0, 4), el(0, 8), extra(0, 2);
  for (int round = 0; round < 2000; ++round) {
    CandidateSet set = candidates_of({"Transport", "Search", "Confirm pay"});
    std::string reply = std::string(fns[fn(rng)]) + " " + els[el(rng)];
    if (extra(rng) == 0) reply += " :: value";
    try {
      Action a = parse_action_reply(reply, set);
      bool in_set = set.find(a.element()).has_value();
      bool sentinel = a.function() == ActionFunction::scroll &&
                      a.element() == kPageSentinel;
      CHECK((in_set || sentinel));
    } catch (const FormatError&) {
    } catch (const HallucinationError&) {
    }
  }
}

namespace {

ScriptedBackend scripted_with(std::vector<std::string> replies) {
  ScriptTable table;
  table[{Role::action_pred, "k"}] = std::move(replies);
  return ScriptedBackend(std::move(table));
}

}  // namespace

TEST_CASE("predict_next_action: first candidate via scripted CLICK 1") {
  PromptBundle b = bundle_with({"Transport", "Search"});
  b.step_key = "k";
  ScriptedBackend backend = scripted_with({"CLICK 1"});
  PredictionResult out = predict_next_action(b, backend, 3);
  CHECK(out.action.element() == "Transport");
  CHECK(out.attempts.size() == 1);
  CHECK(out.attempts[0].status == "ok");
}

TEST_CASE("predict_next_action: recovers on the second attempt") {
  PromptBundle b = bundle_with({"Transport"});
  b.step_key = "k";
  ScriptedBackend backend = scripted_with({"garbage", "CLICK 1"});
  PredictionResult out = predict_next_action(b, backend, 2);
  CHECK(out.action.element() == "Transport");
  REQUIRE(out.attempts.size() == 2);
  CHECK(out.attempts[0].status == "format_error");
  CHECK(out.attempts[1].status == "ok");
  // The retry prompt carries the revision note.
  CHECK(out.attempts[1].prompt.find("REVISION:") != std::string::npos);
}

TEST_CASE("predict_next_action: attempts exhausted") {
  PromptBundle b = bundle_with({"Transport"});
  b.step_key = "k";
  ScriptedBackend backend = scripted_with({"garbage"});
  CHECK_THROWS_AS(predict_next_action(b, backend, 3), PredictionFailure);

  ScriptedBackend backend2 = scripted_with({"garbage"});
  PredictionOutcome out = try_predict(b, backend2, 3);
  CHECK_FALSE(out.action.has_value());
  CHECK(out.attempts.size() == 3);
}

TEST_CASE("predict_next_action: validator feedback consumes the shared "
          "attempt budget") {
  PromptBundle b = bundle_with({"Transport", "Search"});
  b.step_key = "k";
  ScriptedBackend backend = scripted_with({"CLICK 1", "CLICK 2"});
  int calls = 0;
  ActionValidator gate = [&](const Action& a) -> std::optional<std::string> {
    ++calls;
    if (a.element() == "Transport") return "Element 'Transport' is rejected.";
    return std::nullopt;
  };
  PredictionResult out = predict_next_action(b, backend, 3, gate);
  CHECK(out.action.element() == "Search");
  CHECK(out.attempts.size() == 2);
  CHECK(calls == 2);
  CHECK(out.attempts[1].prompt.find("Element 'Transport' is rejected.") !=
        std::string::npos);
}
