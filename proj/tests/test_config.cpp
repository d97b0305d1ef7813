#include <doctest.h>

#include <fstream>
#include <sstream>
#include <string>

#include "owdl/config.hpp"

using namespace owdl;

namespace {

const std::string kConfigDir = std::string(OWDL_SOURCE_DIR) + "/configs";

bool has_diag(const std::vector<std::string>& diags, const std::string& needle) {
    for (const auto& d : diags)
        if (d.find(needle) != std::string::npos) return true;
    return false;
}

}  // namespace

TEST_CASE("shipped default configs validate cleanly and agree") {
    AppConfig kv = load_config(kConfigDir + "/default.owdl");
    AppConfig js = load_config(kConfigDir + "/default.json");

    CHECK(kv.scenario.world.grid_side == 10);
    CHECK(kv.scenario.world.num_sessions == 27);
    CHECK(kv.scenario.questioner.T == 5);
    CHECK(kv.scenario.questioner.T_prime == -1);
    CHECK(kv.scenario.questioner.attempt_cap == -1);
    CHECK(kv.scenario.questioner.R == 1);
    CHECK(kv.scenario.train.temperature == 2.0);
    CHECK(kv.sweep.t_values == std::vector<int>{1, 2, 5, 10, 20, 50});

    CHECK(js.scenario.world.grid_side == kv.scenario.world.grid_side);
    CHECK(js.scenario.questioner.T == kv.scenario.questioner.T);
    CHECK(js.scenario.train.learning_rate == kv.scenario.train.learning_rate);
    CHECK(js.sweep.seeds == kv.sweep.seeds);

    // Desk profile pins the hidden layer and caps the seed list.
    CHECK(kv.scenario.hidden_dim == 256);
    CHECK(kv.sweep.seeds.size() <= 3);
}

TEST_CASE("key-value parser handles comments, nesting, and lists") {
    std::istringstream in(
        "# leading comment\n"
        "world.grid_side = 4   # trailing comment\n"
        "\n"
        "sweep.T_values = 1, 2, 5\n"
        "sweep.profile = paper\n"
        "train.alpha = 0.25\n");
    auto tree = detail::parse_keyvalue(in);
    CHECK(tree["world"]["grid_side"] == 4);
    CHECK(tree["sweep"]["T_values"] == nlohmann::json({1, 2, 5}));
    CHECK(tree["sweep"]["profile"] == "paper");
    CHECK(tree["train"]["alpha"] == 0.25);
}

TEST_CASE("syntax errors carry line numbers") {
    std::istringstream in("world.grid_side = 10\nthis line has no equals\n");
    try {
        detail::parse_keyvalue(in);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    CHECK_THROWS_AS(load_config_tree("/nonexistent/path.owdl"), ConfigError);
}

TEST_CASE("validate names violated constraints with field paths") {
    nlohmann::json tree;
    tree["questioner"]["R"] = 9;
    tree["questioner"]["T"] = 2;
    auto diags = validate_config(tree);
    CHECK(has_diag(diags, "questioner.R"));
    CHECK(has_diag(diags, "mixup constraint"));

    tree = nlohmann::json::object();
    tree["questioner"]["k"] = 101;  // N defaults to 100
    diags = validate_config(tree);
    CHECK(has_diag(diags, "questioner.k"));
    CHECK(has_diag(diags, "k-hot constraint"));

    tree = nlohmann::json::object();
    tree["questioner"]["T"] = -3;
    tree["questioner"]["attempt_cap"] = -2;
    tree["world"]["num_sessions"] = 2;
    diags = validate_config(tree);
    CHECK(has_diag(diags, "questioner.T"));
    CHECK(has_diag(diags, "questioner.attempt_cap"));
    CHECK(has_diag(diags, "world.num_sessions"));

    tree = nlohmann::json::object();
    tree["world"]["embedding_dim"] = 50;  // below grid_side^2
    diags = validate_config(tree);
    CHECK(has_diag(diags, "world.embedding_dim"));

    CHECK(validate_config(nlohmann::json::object()).empty());  // defaults are valid
}

TEST_CASE("profiles control the hidden width") {
    AppConfig cfg;
    cfg.sweep.profile = Profile::paper;
    cfg.sweep.seeds = {1, 2, 3, 4, 5};
    apply_profile(cfg);
    CHECK(cfg.scenario.hidden_dim == 4096);
    CHECK(cfg.sweep.seeds.size() == 5);  // paper profile keeps all seeds

    cfg.sweep.profile = Profile::desk;
    apply_profile(cfg);
    CHECK(cfg.scenario.hidden_dim == 256);
    CHECK(cfg.sweep.seeds.size() == 3);

    CHECK(parse_profile("desk") == Profile::desk);
    CHECK(parse_profile("paper") == Profile::paper);
    CHECK_THROWS_AS(parse_profile("lab"), std::invalid_argument);
}

TEST_CASE("unknown scheme names are rejected during load") {
    nlohmann::json tree;
    tree["sweep"]["schemes"] = {"replay", "telepathy"};
    auto diags = validate_config(tree);
    CHECK_FALSE(diags.empty());
}
