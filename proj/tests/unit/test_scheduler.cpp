#include <doctest.h>

#include <algorithm>
#include <random>
#include <regex>
#include <set>
#include <string>

#include "../support/oracles.hpp"
#include "blockflow/errors.hpp"
#include "blockflow/scheduler.hpp"

using namespace blockflow;
using blockflow::testing::brute_force_makespan;
using blockflow::testing::random_costed_graph;

namespace {

CostedGraph identical_ops(std::size_t n, StageTimes c) {
  CostedGraph g;
  for (std::size_t i = 0; i < n; ++i) g.add_instruction(c);
  return g;
}

std::set<std::string> lp_variables(const std::string& lp) {
  std::set<std::string> vars;
  std::regex var(R"(\b(x_s_\d+|x_\d+_\d+|y_\d+_\d+|t_\d+|z)\b)");
  for (auto it = std::sregex_iterator(lp.begin(), lp.end(), var); it != std::sregex_iterator(); ++it) {
    vars.insert(it->str());
  }
  return vars;
}

}  // namespace

TEST_SUITE("scheduler") {
  TEST_CASE("slot evaluates the stage fronts") {
    CHECK(slot({5, 6, 3}, {10, 18, 25}, 4) == 14);
    CHECK(slot({1, 1, 1}, {0, 0, 0}, 0) == 0);
    CHECK(slot({1, 1, 1}, {2, 3, 4}, 100) == 100);
  }

  TEST_CASE("heuristic on the small examples") {
    CostedGraph chain;
    chain.add_instruction({1, 4, 1});
    chain.add_instruction({1, 2, 1});
    chain.add_edge(0, 1);
    for (std::size_t p : {1, 2, 3}) {
      Schedule s = heuristic_schedule(chain, p);
      CHECK(s.start[0] == 0);
      CHECK(s.start[1] == 6);
      CHECK(s.makespan == 10);
    }

    CostedGraph two = identical_ops(2, {1, 1, 1});
    Schedule p2 = heuristic_schedule(two, 2);
    CHECK(p2.makespan == 3);
    CHECK(p2.worker_of[0] != p2.worker_of[1]);
    Schedule p1 = heuristic_schedule(two, 1);
    CHECK(p1.start == std::vector<double>{0, 1});
    CHECK(p1.makespan == 4);
  }

  TEST_CASE("heuristic work is linear in nodes and edges") {
    std::mt19937_64 rng(2);
    CostedGraph g = random_costed_graph(rng, 150, 0.05);
    HeuristicStats st;
    heuristic_schedule(g, 4, &st);
    CHECK(st.enqueues == g.size());
    CHECK(st.dequeues == g.size());
    CHECK(st.edge_updates == g.edge_count());
  }

  TEST_CASE("naive round robin") {
    CostedGraph four = identical_ops(4, {1, 1, 1});
    Schedule s = naive_schedule(four, 2);
    CHECK(s.streams[0].size() == 2);
    CHECK(s.streams[1].size() == 2);

    CostedGraph chain = identical_ops(3, {1, 1, 1});
    chain.add_edge(0, 1);
    chain.add_edge(1, 2);
    Schedule c = naive_schedule(chain, 3);
    CHECK(c.worker_of == std::vector<std::size_t>{0, 1, 2});
    CHECK(c.makespan == 9);
    CHECK(validate(c, chain).empty());

    Schedule again = naive_schedule(chain, 3);
    CHECK(again.start == c.start);
    CHECK(again.streams == c.streams);
  }

  TEST_CASE("exact on the small examples") {
    CHECK(exact_schedule(identical_ops(1, {1, 1, 1}), 1).schedule.makespan == 3);
    ExactResult r = exact_schedule(identical_ops(2, {1, 1, 1}), 1);
    CHECK(r.schedule.makespan == 4);
    CHECK(r.optimal);
    CHECK(brute_force_makespan(identical_ops(2, {1, 1, 1}), 1) == 4);
  }

  TEST_CASE("exact agrees with exhaustive enumeration") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 40; ++trial) {
      const std::size_t n = 2 + trial % 5;
      const std::size_t p = 1 + trial % 3;
      CostedGraph g = random_costed_graph(rng, n, 0.3);
      ExactResult r = exact_schedule(g, p);
      CAPTURE(trial);
      CHECK(r.optimal);
      CHECK(validate(r.schedule, g).empty());
      CHECK(r.schedule.makespan == doctest::Approx(brute_force_makespan(g, p)));
      CHECK(r.schedule.makespan <= heuristic_schedule(g, p).makespan + 1e-9);
    }
  }

  TEST_CASE("exact size cap and budget") {
    std::mt19937_64 rng(3);
    CostedGraph big = random_costed_graph(rng, 11, 0.2);
    CHECK_THROWS_AS(exact_schedule(big, 2), SizeCapError);
    CHECK_THROWS_AS(exact_schedule(identical_ops(3, {1, 1, 1}), 4), SizeCapError);
    ExactOptions o;
    o.node_budget = 50;
    ExactResult r = exact_schedule(big, 2, o);
    CHECK(validate(r.schedule, big).empty());
    CHECK(r.nodes_explored <= 50);
    CHECK(r.schedule.makespan <= heuristic_schedule(big, 2).makespan + 1e-9);
  }

  TEST_CASE("validate reports broken schedules") {
    CostedGraph chain = identical_ops(2, {1, 1, 1});
    chain.add_edge(0, 1);
    Schedule s = heuristic_schedule(chain, 2);
    CHECK(validate(s, chain).empty());
    s.start[1] = 1;
    auto v = validate(s, chain);
    REQUIRE_FALSE(v.empty());
    CHECK(v[0].find("precedence") != std::string::npos);

    Schedule lost = heuristic_schedule(chain, 2);
    lost.streams[lost.worker_of[1]].clear();
    CHECK_FALSE(validate(lost, chain).empty());
  }

  TEST_CASE("random schedules are feasible and above the critical path") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 1 + rng() % 60;
      const std::size_t p = 1 + rng() % 8;
      CostedGraph g = random_costed_graph(rng, n, 2.5 / double(n));
      const double cp = critical_path(g);
      for (const Schedule& s : {heuristic_schedule(g, p), naive_schedule(g, p)}) {
        CHECK(validate(s, g).empty());
        CHECK(s.makespan >= cp - 1e-9);
      }
    }
  }

  TEST_CASE("timed schedule reproduces the heuristic start times") {
    std::mt19937_64 rng(29);
    CostedGraph g = random_costed_graph(rng, 30, 0.1);
    Schedule h = heuristic_schedule(g, 3);
    Schedule t = timed_schedule(g, 3, h.streams, SchedulerKind::Heuristic);
    CHECK(t.makespan == h.makespan);
    CHECK(t.start == h.start);
  }

  TEST_CASE("ILP of a single instruction") {
    CostedGraph g = identical_ops(1, {1, 2, 3});
    const std::string lp = emit_ilp(g, 2);
    CHECK(lp_variables(lp) == std::set<std::string>{"x_s_1", "t_1", "z"});
    CHECK(lp.find(" makespan_1: + t_1 - z <= -6") != std::string::npos);
    CHECK(lp.find(" num_processors: + x_s_1 <= 2") != std::string::npos);
  }

  TEST_CASE("ILP of a chain carries precedence and the processor bound") {
    CostedGraph g = identical_ops(3, {1, 1, 1});
    g.add_edge(0, 1);
    g.add_edge(1, 2);
    const std::string lp = emit_ilp(g, 2);
    CHECK(lp.find(" precedence_1_2: + t_1 - t_2 <= -3") != std::string::npos);
    CHECK(lp.find(" precedence_2_3: + t_2 - t_3 <= -3") != std::string::npos);
    CHECK(lp.find(" num_processors: + x_s_1 + x_s_2 + x_s_3 <= 2") != std::string::npos);
    CHECK(lp.find("\\ U = 9") != std::string::npos);
    CHECK(lp.find("Binaries") != std::string::npos);
    CHECK(lp.rfind("End\n") == lp.size() - 4);
    CHECK(lp == emit_ilp(g, 2));
  }

  TEST_CASE("scheduler names") {
    CHECK(parse_scheduler("exact") == SchedulerKind::Exact);
    CHECK(parse_scheduler("naive") == SchedulerKind::Naive);
    CHECK_FALSE(parse_scheduler("fifo").has_value());
    CHECK(to_string(SchedulerKind::Heuristic) == "heuristic");
  }
}
