#include "doctest.h"
#include "pip/config.hpp"

using namespace pip;

TEST_CASE("default config round-trips through serialize/parse") {
    RunConfig cfg;
    cfg.model.n_layers = 8;
    cfg.prune.layers_to_prune = 3;
    cfg.prune.mode = PruneMode::BlockInfluence;
    cfg.perturbation.method = PerturbMethod::Insert;
    cfg.calib_path = "data/calib.txt";
    auto parsed = RunConfig::parse(cfg.serialize());
    CHECK(parsed.model.n_layers == 8);
    CHECK(parsed.prune.layers_to_prune == 3);
    CHECK(parsed.prune.mode == PruneMode::BlockInfluence);
    CHECK(parsed.perturbation.method == PerturbMethod::Insert);
    CHECK(parsed.calib_path == "data/calib.txt");
    // the resolved prune config carries the perturbation spec
    CHECK(parsed.prune.perturbation.method == PerturbMethod::Insert);
}

TEST_CASE("unknown keys and malformed lines are rejected") {
    CHECK_THROWS_AS(RunConfig::parse("[model]\nbogus = 1\n"), ValidationError);
    CHECK_THROWS_AS(RunConfig::parse("[model]\nno equals sign\n"), ValidationError);
}

TEST_CASE("comments and blank lines are ignored") {
    auto cfg = RunConfig::parse("# comment\n\n[model]\nn_layers = 12\n");
    CHECK(cfg.model.n_layers == 12);
}
