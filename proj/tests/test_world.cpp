#include <doctest.h>

#include <filesystem>

#include "llmpa/harness.hpp"
#include "llmpa/world.hpp"

using namespace llmpa;

namespace {

std::string fixture(const std::string& rel) {
  return std::string(LLMPA_FIXTURE_DIR) + "/" + rel;
}

const char* kMinimalWorld = R"({
  "world_id": "mini",
  "start_page": "a",
  "pages": {
    "a": {"page_id": "a", "nodes": [
      {"id":"n1","text":"Go","x":0,"y":0,"w":40,"h":20,"clickable":true,"typeable":false}]},
    "b": {"page_id": "b", "nodes": [
      {"id":"n1","text":"Done","x":0,"y":0,"w":40,"h":20,"clickable":false,"typeable":false}]}
  },
  "transitions": [
    {"from":"a","match":{"function":"click","element":"Go"},"to":"b","terminal":true}
  ],
  "tasks": [
    {"task_id":"t1","description":"go somewhere","gold_actions":[
      {"function":"click","element":"Go","value":null}]}
  ]
})";

}  // namespace

TEST_CASE("load_world: minimal world loads and replays") {
  WorldSpec world = parse_world(kMinimalWorld, "mini");
  CHECK(world.pages.size() == 2);
  CHECK(world.tasks.size() == 1);
  ApplyResult res = apply(world, "a", Action::click("Go"));
  CHECK(res.next_page == "b");
  CHECK(res.terminal);
  CHECK_FALSE(res.noop);
}

TEST_CASE("load_world: gold action missing its element names the task") {
  std::string broken = kMinimalWorld;
  size_t pos = broken.find("\"element\":\"Go\"},\"to\"");
  // Break the transition instead: reference a missing element.
  std::string bad = R"({
    "world_id": "mini",
    "start_page": "a",
    "pages": {
      "a": {"page_id": "a", "nodes": [
        {"id":"n1","text":"Go","x":0,"y":0,"w":40,"h":20,"clickable":true,"typeable":false}]},
      "b": {"page_id": "b", "nodes": []}
    },
    "transitions": [
      {"from":"a","match":{"function":"click","element":"Go"},"to":"b","terminal":true}
    ],
    "tasks": [
      {"task_id":"lost_task","description":"d","gold_actions":[
        {"function":"click","element":"Missing","value":null}]}
    ]
  })";
  (void)pos;
  try {
    parse_world(bad, "bad");
    FAIL("expected LoadError");
  } catch (const LoadError& e) {
    CHECK(std::string(e.what()).find("lost_task") != std::string::npos);
  }
}

TEST_CASE("load_world: dangling references and non-terminal replays") {
  std::string dangling = R"({
    "world_id": "w", "start_page": "a",
    "pages": {"a": {"page_id":"a","nodes":[
      {"id":"n1","text":"Go","x":0,"y":0,"w":4,"h":4,"clickable":true,"typeable":false}]}},
    "transitions": [
      {"from":"a","match":{"function":"click","element":"Go"},"to":"ghost"}],
    "tasks": []
  })";
  CHECK_THROWS_AS(parse_world(dangling, "w"), LoadError);

  std::string nonterminal = R"({
    "world_id": "w", "start_page": "a",
    "pages": {
      "a": {"page_id":"a","nodes":[
        {"id":"n1","text":"Go","x":0,"y":0,"w":4,"h":4,"clickable":true,"typeable":false}]},
      "b": {"page_id":"b","nodes":[]}
    },
    "transitions": [
      {"from":"a","match":{"function":"click","element":"Go"},"to":"b"}],
    "tasks": [{"task_id":"t","description":"d","gold_actions":[
      {"function":"click","element":"Go","value":null}]}]
  })";
  try {
    parse_world(nonterminal, "w");
    FAIL("expected LoadError");
  } catch (const LoadError& e) {
    CHECK(std::string(e.what()).find("terminal") != std::string::npos);
  }
}

TEST_CASE("load_world: bundled worlds load with terminal gold replays") {
  CHECK(load_world(fixture("worlds/flight.json")).pages.size() == 7);
  CHECK(load_world(fixture("worlds/subway.json")).pages.size() == 3);
  WorldSpec mall = load_world(fixture("worlds/mall.json"));
  CHECK(mall.tasks.size() == 8);
  size_t steps = 0;
  for (const TaskSpec& t : mall.tasks) steps += t.gold_actions.size();
  CHECK(steps >= 30);
}

TEST_CASE("apply: value patterns and unmatched no-ops") {
  WorldSpec world = load_world(fixture("worlds/flight.json"));

  ApplyResult res = apply(world, "homepage", Action::click("Transport"));
  CHECK(res.next_page == "search");

  // Wildcard value pattern accepts any typed value.
  res = apply(world, "search",
              Action::type("input departure city", "Hangzhou"));
  CHECK(res.next_page == "search");
  CHECK_FALSE(res.noop);
  res = apply(world, "search", Action::type("input destination", "anything"));
  CHECK(res.next_page == "date");

  // No matching rule: stay put with the no-op flag.
  res = apply(world, "homepage", Action::click("Scan"));
  CHECK(res.next_page == "homepage");
  CHECK(res.noop);
  CHECK_FALSE(res.terminal);

  // Identical queries always produce identical results.
  for (int i = 0; i < 3; ++i) {
    ApplyResult again = apply(world, "homepage", Action::click("Transport"));
    CHECK(again.next_page == "search");
    CHECK(again.terminal == false);
  }
}

TEST_CASE("apply: exact value patterns") {
  WorldSpec world = load_world(fixture("worlds/subway.json"));
  ApplyResult hit = apply(world, "member",
                          Action::type("Search bar", "subway ticket coupon"));
  CHECK(hit.next_page == "coupons");
  ApplyResult miss = apply(world, "member",
                           Action::type("Search bar", "something else"));
  CHECK(miss.noop);
}

TEST_CASE("run_episode: flight gold script completes the task") {
  WorldSpec world = load_world(fixture("worlds/flight.json"));
  auto backend = make_backend({BackendKind::scripted},
                              fixture("scripts/flight_gold.json"));
  RunConfig config;
  EpisodeResult result =
      run_episode(world, world.tasks[0], config, *backend);

  CHECK(result.task_success);
  CHECK(result.terminal_reached);
  CHECK(result.abort_reason.empty());
  REQUIRE(result.trajectory.steps.size() == 7);
  for (const StepRecord& s : result.steps) CHECK(s.attempts.size() == 1);
  for (const StepOutcome& o : result.outcomes) CHECK(o.success);

  // Replaying the recorded actions reproduces the recorded page sequence.
  std::string current = world.start_page;
  for (const StepRecord& s : result.steps) {
    CHECK(s.page_before == current);
    ApplyResult res = apply(world, current, *s.action);
    CHECK(res.next_page == s.page_after);
    current = res.next_page;
  }

  // The alignment consumed exactly the executed prefix at every step.
  for (const StepRecord& s : result.steps)
    CHECK(s.alignment_m == s.index - 1);
}

TEST_CASE("run_episode: hallucination script corrected by calibration") {
  WorldSpec world = load_world(fixture("worlds/subway.json"));
  auto backend = make_backend({BackendKind::scripted},
                              fixture("scripts/subway_halluc.json"));
  RunConfig config;
  EpisodeResult result = run_episode(world, world.tasks[0], config, *backend);

  CHECK(result.task_success);
  REQUIRE(result.steps.size() == 2);
  const StepRecord& exchange = result.steps[1];
  REQUIRE(exchange.attempts.size() == 2);
  CHECK(exchange.attempts[0].status == "fail_executability");
  CHECK(exchange.attempts[0].feedback ==
        "Element 'Exchange Rights' is not clickable; choose a different "
        "candidate.");
  CHECK(exchange.attempts[1].status == "ok");
  CHECK(exchange.action->element() == "Exchange Now");
}

TEST_CASE("run_episode: calibration off executes the no-op and fails") {
  WorldSpec world = load_world(fixture("worlds/subway.json"));
  auto backend = make_backend({BackendKind::scripted},
                              fixture("scripts/subway_halluc.json"));
  RunConfig config;
  config.calibration = false;
  EpisodeResult result = run_episode(world, world.tasks[0], config, *backend);

  CHECK_FALSE(result.task_success);
  REQUIRE(result.steps.size() >= 2);
  CHECK(result.steps[1].noop);
  CHECK(result.steps[1].action->element() == "Exchange Rights");
}

TEST_CASE("run_episode: adversarial garbage terminates with prediction "
          "failure") {
  WorldSpec world = load_world(fixture("worlds/flight.json"));
  auto backend = make_backend({BackendKind::scripted},
                              fixture("scripts/adversarial_garbage.json"));
  RunConfig config;
  EpisodeResult result = run_episode(world, world.tasks[0], config, *backend);
  CHECK_FALSE(result.task_success);
  CHECK(result.abort_reason == "prediction_failure");
  CHECK(result.steps.size() == 1);
  CHECK(result.steps[0].attempts.size() == 3);
  for (const StepOutcome& o : result.outcomes) CHECK_FALSE(o.success);
}

TEST_CASE("run_episode: looping scripts hit the loop gate or the step cap") {
  WorldSpec world = load_world(fixture("worlds/mall.json"));
  const TaskSpec* task = world.find_task("bills_then_water");
  REQUIRE(task);

  // Calibration on: the loop check aborts the episode early.
  {
    auto backend = make_backend({BackendKind::scripted},
                                fixture("scripts/adversarial_loop.json"));
    RunConfig config;
    config.icpad = false;
    EpisodeResult result = run_episode(world, *task, config, *backend);
    CHECK_FALSE(result.task_success);
    CHECK(result.abort_reason == "prediction_failure");
    bool saw_loop_verdict = false;
    for (const StepRecord& s : result.steps)
      for (const AttemptRecord& a : s.attempts)
        saw_loop_verdict |= a.status == "fail_loop";
    CHECK(saw_loop_verdict);
  }

  // All gates off: the episode ping-pongs until the step cap.
  {
    auto backend = make_backend({BackendKind::scripted},
                                fixture("scripts/adversarial_loop.json"));
    RunConfig config;
    config.icpad = false;
    config.calibration = false;
    EpisodeResult result = run_episode(world, *task, config, *backend);
    CHECK_FALSE(result.task_success);
    CHECK(result.abort_reason == "step_cap");
    CHECK(result.steps.size() == 2 * task->gold_actions.size() + 3);
  }
}

TEST_CASE("run_episode: identical runs produce identical traces") {
  WorldSpec world = load_world(fixture("worlds/subway.json"));
  RunConfig config;
  auto run_once = [&]() {
    auto backend = make_backend({BackendKind::scripted},
                                fixture("scripts/subway_halluc.json"));
    EpisodeResult result =
        run_episode(world, world.tasks[0], config, *backend);
    return episode_trace_jsonl(result);
  };
  CHECK(run_once() == run_once());
}

TEST_CASE("run_episode: scroll transitions to the extended page variant") {
  const char* scroll_world = R"({
    "world_id": "feed", "start_page": "long",
    "pages": {
      "long": {"page_id":"long","nodes":[
        {"id":"n1","text":"Item 1","x":0,"y":0,"w":80,"h":20,"clickable":true,"typeable":false}]},
      "long2": {"page_id":"long2","nodes":[
        {"id":"n1","text":"Item 1","x":0,"y":0,"w":80,"h":20,"clickable":true,"typeable":false},
        {"id":"n2","text":"Item 2","x":0,"y":40,"w":80,"h":20,"clickable":true,"typeable":false}]},
      "opened": {"page_id":"opened","nodes":[
        {"id":"n1","text":"Item 2 detail","x":0,"y":0,"w":80,"h":20,"clickable":false,"typeable":false}]}
    },
    "transitions": [
      {"from":"long","match":{"function":"scroll","element":"PAGE"},"to":"long2"},
      {"from":"long2","match":{"function":"click","element":"Item 2"},"to":"opened","terminal":true}
    ],
    "tasks": [{"task_id":"open_item","description":"open the second item",
      "key_path_tag":"open_item",
      "gold_actions":[
        {"function":"scroll","element":"PAGE","value":null},
        {"function":"click","element":"Item 2","value":null}]}]
  })";
  WorldSpec world = parse_world(scroll_world, "feed");

  ScriptTable table;
  table[{Role::action_pred, "open_item/long/h0"}] = {"SCROLL PAGE"};
  table[{Role::action_pred, "open_item/long2/h1"}] = {"CLICK Item 2"};
  ScriptedBackend backend(std::move(table));
  RunConfig config;
  EpisodeResult result = run_episode(world, world.tasks[0], config, backend);
  CHECK(result.task_success);
  REQUIRE(result.steps.size() == 2);
  CHECK(result.steps[0].action->function() == ActionFunction::scroll);
  CHECK(result.steps[0].page_after == "long2");
}

TEST_CASE("run_episode: chain cache directory round-trips generated chains") {
  WorldSpec world = load_world(fixture("worlds/subway.json"));
  std::string cache_dir = (std::filesystem::temp_directory_path() /
                           "llmpa_chain_cache")
                              .string();
  std::filesystem::remove_all(cache_dir);
  std::filesystem::create_directories(cache_dir);

  RunConfig config;
  config.chain_cache_dir = cache_dir;
  {
    auto backend = make_backend({BackendKind::scripted},
                                fixture("scripts/subway_gold.json"));
    EpisodeResult first = run_episode(world, world.tasks[0], config, *backend);
    CHECK(first.task_success);
    CHECK(std::filesystem::exists(cache_dir +
                                  "/subway_coupon.chain.json"));
  }
  // A doctored cache entry wins over the task's own gold chain.
  {
    InstructionChain doctored{ChainKind::elaborate_chain,
                              world.tasks[0].description,
                              {"cached step one", "cached step two"}};
    save_chain(doctored, cache_dir + "/subway_coupon.chain.json");
    auto backend = make_backend({BackendKind::scripted},
                                fixture("scripts/subway_gold.json"));
    EpisodeResult second =
        run_episode(world, world.tasks[0], config, *backend);
    REQUIRE(second.chain);
    CHECK(second.chain->steps ==
          std::vector<std::string>{"cached step one", "cached step two"});
  }
  std::filesystem::remove_all(cache_dir);
}

TEST_CASE("run_episode: grouping off uses raw node texts") {
  WorldSpec world = load_world(fixture("worlds/mall.json"));
  const TaskSpec* task = world.find_task("food_voucher");
  REQUIRE(task);

  auto gold = make_backend({BackendKind::scripted},
                           fixture("scripts/mall_ablation.json"));
  RunConfig config;
  EpisodeResult grouped = run_episode(world, *task, config, *gold);
  CHECK(grouped.task_success);

  auto raw = make_backend({BackendKind::scripted},
                          fixture("scripts/mall_ablation.json"));
  config.grouping = false;
  EpisodeResult ungrouped = run_episode(world, *task, config, *raw);
  CHECK_FALSE(ungrouped.task_success);
  CHECK(ungrouped.abort_reason == "prediction_failure");
  bool saw_hallucination = false;
  for (const StepRecord& s : ungrouped.steps)
    for (const AttemptRecord& a : s.attempts)
      saw_hallucination |= a.status == "hallucination";
  CHECK(saw_hallucination);
}
