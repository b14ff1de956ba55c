#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include <json.hpp>

#include "ohprl/intervention.hpp"
#include "ohprl/runtime.hpp"

namespace ohprl {

// Console wire format: one JSON object per WebSocket text message.
//
// outbound  {"type":"frame","t":..,"episode":..,"agent":[x,y],"objects":[..],
//            "flags":{..},"param_version":..}
//           {"type":"metrics", <one key per metrics.csv column>}
//           {"type":"error","reason":"..."}
// inbound   {"type":"override","action":[dx,dy]}
//           {"type":"override_end"}
//
// Every object in "objects" is {"kind":..,"pos":[x,y],"size":[w,h]} with pos
// the center; circles use their diameter for both sizes.

nlohmann::json frame_message(const LiveFrame& frame, const EnvParams& env);

/// Turns a metrics.csv row into a metrics message; empty fields become null.
nlohmann::json metrics_message(const std::string& csv_row);

nlohmann::json error_message(const std::string& reason);

struct OverrideMessage {
    Vec2 action = Vec2::Zero();  // as received, not yet clamped
};
struct OverrideEndMessage {};
struct InvalidMessage {
    std::string reason;
};

using InboundMessage = std::variant<OverrideMessage, OverrideEndMessage, InvalidMessage>;

/// Never throws; anything that is not a well-formed inbound message comes
/// back as InvalidMessage with a human-readable reason.
InboundMessage parse_inbound(std::string_view text);

nlohmann::json to_json(const OverrideMessage& message);
nlohmann::json to_json(const OverrideEndMessage& message);

/// Forwards a parsed inbound message to the mailbox. Returns the error frame
/// to send back for invalid messages.
std::optional<nlohmann::json> dispatch_inbound(const InboundMessage& message, OverrideMailbox& mailbox);

/// Schema check for any message in either direction; nullopt when valid.
std::optional<std::string> schema_violation(const nlohmann::json& message);

}  // namespace ohprl
