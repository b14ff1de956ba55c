#pragma once

#include "ohprl/nets.hpp"

namespace ohprl {

/// One executed, non-intervened environment step.
struct Transition {
    Vector state;
    Vector action;
    double reward = 0.0;
    double done = 0.0;
    Vector next_state;
};

/// One intervened step: the executed override is preferred, the policy
/// proposal it displaced is the weak action.
struct PreferenceTuple {
    Vector state;
    Vector preferred;
    Vector weak;
    double reward = 0.0;
    double done = 0.0;
    Vector next_state;
};

}  // namespace ohprl
