#include "ohprl/protocol.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "ohprl/metrics.hpp"

namespace ohprl {

using nlohmann::json;

namespace {

json pair(double x, double y) { return json::array({x, y}); }
json pair(const Vec2& v) { return pair(v.x(), v.y()); }

json object(const char* kind, const Vec2& center, double w, double h) {
    return {{"kind", kind}, {"pos", pair(center)}, {"size", pair(w, h)}};
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
}

bool is_pair(const json& j) {
    return j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number() &&
           std::isfinite(j[0].get<double>()) && std::isfinite(j[1].get<double>());
}

std::optional<std::string> frame_violation(const json& m) {
    for (const char* key : {"t", "episode", "param_version"}) {
        if (!m.contains(key) || !m[key].is_number_integer() || m[key].get<long long>() < 0) {
            return std::string("frame field '") + key + "' must be a non-negative integer";
        }
    }
    if (!m.contains("agent") || !is_pair(m["agent"])) return "frame field 'agent' must be [x, y]";
    if (!m.contains("objects") || !m["objects"].is_array()) return "frame field 'objects' must be an array";
    for (const auto& o : m["objects"]) {
        if (!o.is_object() || !o.contains("kind") || !o["kind"].is_string() || !o.contains("pos") ||
            !is_pair(o["pos"]) || !o.contains("size") || !is_pair(o["size"])) {
            return "frame object must be {kind, pos:[x,y], size:[w,h]}";
        }
    }
    if (!m.contains("flags") || !m["flags"].is_object()) return "frame field 'flags' must be an object";
    for (const char* key : {"success", "unsafe_contact", "truncated", "intervened"}) {
        if (!m["flags"].contains(key) || !m["flags"][key].is_boolean()) {
            return std::string("frame flag '") + key + "' must be a boolean";
        }
    }
    if (!m["flags"].contains("reason") || !m["flags"]["reason"].is_string()) return "frame flag 'reason' must be a string";
    return std::nullopt;
}

std::optional<std::string> metrics_violation(const json& m) {
    for (const auto& column : split_csv(kMetricsColumns)) {
        if (!m.contains(column)) return "metrics message lacks '" + column + "'";
        if (!m[column].is_null() && !m[column].is_number()) return "metrics field '" + column + "' must be a number";
    }
    return std::nullopt;
}

}  // namespace

json frame_message(const LiveFrame& f, const EnvParams& env) {
    json objects = json::array();
    if (f.env_id == EnvId::PressButton) {
        const double half = env.button_width / 2.0;
        const double band_h = env.button_top + env.side_band_margin;
        objects.push_back(object("button", {env.button_x, env.button_top / 2.0}, env.button_width, env.button_top));
        objects.push_back(object("unsafe_region", {env.button_x - half - env.side_band_width / 2.0, band_h / 2.0},
                                 env.side_band_width, band_h));
        objects.push_back(object("unsafe_region", {env.button_x + half + env.side_band_width / 2.0, band_h / 2.0},
                                 env.side_band_width, band_h));
    } else {
        objects.push_back(object("ball", f.ball, 2.0 * env.ball_radius, 2.0 * env.ball_radius));
        objects.push_back(object("goal", f.goal, 2.0 * env.goal_radius, 2.0 * env.goal_radius));
        const double b = env.wall_band;
        objects.push_back(object("unsafe_region", {b / 2.0, 0.5}, b, 1.0));
        objects.push_back(object("unsafe_region", {1.0 - b / 2.0, 0.5}, b, 1.0));
        objects.push_back(object("unsafe_region", {0.5, b / 2.0}, 1.0, b));
        objects.push_back(object("unsafe_region", {0.5, 1.0 - b / 2.0}, 1.0, b));
    }
    return {{"type", "frame"},
            {"env", std::string(to_string(f.env_id))},
            {"t", f.t},
            {"episode", f.episode},
            {"agent", pair(f.agent)},
            {"action", pair(f.action)},
            {"objects", std::move(objects)},
            {"flags",
             {{"success", f.success},
              {"unsafe_contact", f.unsafe_contact},
              {"truncated", f.truncated},
              {"intervened", f.intervened},
              {"reason", std::string(to_string(f.reason))}}},
            {"param_version", f.param_version}};
}

json metrics_message(const std::string& csv_row) {
    const auto columns = split_csv(kMetricsColumns);
    const auto values = split_csv(csv_row);
    json m = {{"type", "metrics"}};
    for (std::size_t k = 0; k < columns.size(); ++k) {
        const std::string v = k < values.size() ? values[k] : std::string();
        if (v.empty()) {
            m[columns[k]] = nullptr;
        } else {
            m[columns[k]] = std::stod(v);
        }
    }
    return m;
}

json error_message(const std::string& reason) { return {{"type", "error"}, {"reason", reason}}; }

InboundMessage parse_inbound(std::string_view text) {
    json m = json::parse(text, nullptr, false);
    if (m.is_discarded()) return InvalidMessage{"message is not valid JSON"};
    if (!m.is_object()) return InvalidMessage{"message must be a JSON object"};
    if (!m.contains("type") || !m["type"].is_string()) return InvalidMessage{"message lacks a string 'type'"};
    const std::string type = m["type"].get<std::string>();
    if (type == "override") {
        if (!m.contains("action") || !is_pair(m["action"])) {
            return InvalidMessage{"override needs 'action': [dx, dy] with finite numbers"};
        }
        return OverrideMessage{Vec2(m["action"][0].get<double>(), m["action"][1].get<double>())};
    }
    if (type == "override_end") return OverrideEndMessage{};
    return InvalidMessage{"unknown message type '" + type + "'"};
}

json to_json(const OverrideMessage& message) { return {{"type", "override"}, {"action", pair(message.action)}}; }

json to_json(const OverrideEndMessage&) { return {{"type", "override_end"}}; }

std::optional<json> dispatch_inbound(const InboundMessage& message, OverrideMailbox& mailbox) {
    if (const auto* o = std::get_if<OverrideMessage>(&message)) {
        mailbox.post(o->action);
        return std::nullopt;
    }
    if (std::holds_alternative<OverrideEndMessage>(message)) {
        mailbox.end();
        return std::nullopt;
    }
    return error_message(std::get<InvalidMessage>(message).reason);
}

std::optional<std::string> schema_violation(const json& m) {
    if (!m.is_object() || !m.contains("type") || !m["type"].is_string()) return "message lacks a string 'type'";
    const std::string type = m["type"].get<std::string>();
    if (type == "frame") return frame_violation(m);
    if (type == "metrics") return metrics_violation(m);
    if (type == "error") {
        if (!m.contains("reason") || !m["reason"].is_string()) return "error message needs a string 'reason'";
        return std::nullopt;
    }
    if (type == "override") {
        if (!m.contains("action") || !is_pair(m["action"])) return "override needs 'action': [dx, dy]";
        return std::nullopt;
    }
    if (type == "override_end") return std::nullopt;
    return "unknown message type '" + type + "'";
}

}  // namespace ohprl
