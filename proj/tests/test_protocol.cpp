#include <doctest.h>

#include "ohprl/protocol.hpp"

using namespace ohprl;
using nlohmann::json;

TEST_SUITE("protocol") {

TEST_CASE("frame messages validate for both environments") {
    const EnvParams p;
    for (EnvId id : {EnvId::PressButton, EnvId::PushBall}) {
        LiveFrame f;
        f.env_id = id;
        f.episode = 4;
        f.t = 17;
        f.agent = {0.5, 0.5};
        f.intervened = true;
        f.reason = TriggerReason::Stall;
        f.param_version = 120;
        const json m = frame_message(f, p);
        CHECK_FALSE(schema_violation(m).has_value());
        CHECK(m["type"] == "frame");
        CHECK(m["agent"][0] == 0.5);
        CHECK(m["flags"]["intervened"] == true);
        CHECK(m["flags"]["reason"] == "stall");
        CHECK(m["param_version"] == 120);
        CHECK(m["objects"].size() == (id == EnvId::PressButton ? 3 : 6));
    }
}

TEST_CASE("metrics message carries every column") {
    const json m = metrics_message("120,3,1,0.1,40,0.25,,,,,,,,9");
    CHECK_FALSE(schema_violation(m).has_value());
    CHECK(m["step"] == 120);
    CHECK(m["loss_critic"] == 0.25);
    CHECK(m["loss_actor"].is_null());
    CHECK(m["param_version"] == 9);
}

TEST_CASE("schema violations are reported") {
    CHECK(schema_violation(json::array()).has_value());
    CHECK(schema_violation(json{{"type", "telemetry"}}).has_value());
    CHECK(schema_violation(json{{"type", "error"}}).has_value());
    CHECK_FALSE(schema_violation(error_message("x")).has_value());
    json frame = frame_message(LiveFrame{}, EnvParams{});
    frame["agent"] = json::array({0.5});
    CHECK(schema_violation(frame).has_value());
    frame = frame_message(LiveFrame{}, EnvParams{});
    frame["flags"].erase("unsafe_contact");
    CHECK(schema_violation(frame).has_value());
    json metrics = metrics_message("1,1,1,1,1,,,,,,,,,1");
    metrics.erase("mean_A");
    CHECK(schema_violation(metrics).has_value());
    CHECK_FALSE(schema_violation(to_json(OverrideMessage{Vec2(0.1, 0.2)})).has_value());
    CHECK_FALSE(schema_violation(to_json(OverrideEndMessage{})).has_value());
}

TEST_CASE("inbound parsing") {
    const InboundMessage o = parse_inbound(R"({"type":"override","action":[0.25,-1]})");
    REQUIRE(std::holds_alternative<OverrideMessage>(o));
    CHECK(std::get<OverrideMessage>(o).action == Vec2(0.25, -1.0));
    CHECK(std::holds_alternative<OverrideEndMessage>(parse_inbound(R"({"type":"override_end"})")));

    for (const char* bad : {"", "not json", "[1,2]", R"({"action":[0,0]})", R"({"type":"override"})",
                            R"({"type":"override","action":[0]})", R"({"type":"override","action":["a",1]})",
                            R"({"type":"frame"})", R"({"type":7})"}) {
        CAPTURE(bad);
        const InboundMessage m = parse_inbound(bad);
        REQUIRE(std::holds_alternative<InvalidMessage>(m));
        CHECK_FALSE(std::get<InvalidMessage>(m).reason.empty());
    }
}

TEST_CASE("dispatch posts overrides and answers invalid input with an error") {
    OverrideMailbox box;
    CHECK_FALSE(dispatch_inbound(parse_inbound(R"({"type":"override","action":[2.0,0]})"), box).has_value());
    CHECK(box.pending());

    // Clamped to the unit box on the way into the mailbox.
    const EnvParams p;
    EnvState s;
    s.agent = {0.5, 0.6};
    const InterventionDecision d =
        decide(InterventionMode::HumanBridge, OracleParams{}, p, s, Vector::Zero(2), EpisodeHistory{}, &box);
    REQUIRE(d.active);
    CHECK(*d.override_action == Vec2(1.0, 0.0));

    const auto reply = dispatch_inbound(parse_inbound(R"({"type":"nope"})"), box);
    REQUIRE(reply.has_value());
    CHECK((*reply)["type"] == "error");
    CHECK_FALSE(schema_violation(*reply).has_value());

    CHECK_FALSE(dispatch_inbound(OverrideEndMessage{}, box).has_value());
    CHECK_FALSE(box.pending());
}

}  // TEST_SUITE
