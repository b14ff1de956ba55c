#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ohprl/checkpoint.hpp"
#include "ohprl/config.hpp"
#include "ohprl/errors.hpp"
#include "ohprl/runtime.hpp"

namespace py = pybind11;
using namespace ohprl;

namespace {

py::dict step_dict(const StepResult& r) {
    py::dict d;
    d["observation"] = r.observation;
    d["reward"] = r.reward;
    d["done"] = r.done;
    d["success"] = r.success;
    d["unsafe_contact"] = r.unsafe_contact;
    d["truncated"] = r.truncated;
    return d;
}

py::dict eval_dict(const EvalResult& e) {
    py::dict d;
    d["success_rate"] = e.success_rate;
    d["mean_episode_length"] = e.mean_episode_length;
    d["mean_wall_seconds"] = e.mean_wall_seconds;
    d["episodes"] = e.episodes;
    return d;
}

RunConfig build_config(const std::string& text, const std::map<std::string, std::string>& overrides) {
    RunConfig c = parse_config_text(text);
    for (const auto& [key, value] : overrides) apply_setting(c, key, value);
    validate(c);
    return c;
}

}  // namespace

PYBIND11_MODULE(_ohprl, m) {
    m.doc() = "Gated-preference RL trainer: networks, environments, training and evaluation.";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
    py::register_exception<ProtocolError>(m, "ProtocolError", PyExc_RuntimeError);
    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<SamplingError>(m, "SamplingError", PyExc_RuntimeError);
    py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_IOError);

    py::class_<ParamSet>(m, "ParamSet")
        .def_property_readonly("head", [](const ParamSet& p) { return std::string(to_string(p.head)); })
        .def_readonly("version", &ParamSet::version)
        .def_property_readonly("widths", &ParamSet::widths)
        .def_property_readonly("parameter_count", &ParamSet::parameter_count)
        .def_property_readonly("layers",
                               [](const ParamSet& p) {
                                   py::list out;
                                   for (const Layer& l : p.layers) out.append(py::make_tuple(l.weight, l.bias));
                                   return out;
                               })
        .def("__repr__", [](const ParamSet& p) {
            std::string w;
            for (int x : p.widths()) w += (w.empty() ? "" : ",") + std::to_string(x);
            return "<ParamSet " + std::string(to_string(p.head)) + " [" + w + "] v" + std::to_string(p.version) +
                   ">";
        });

    m.def(
        "init_params",
        [](const std::vector<int>& widths, const std::string& head, std::uint64_t seed) {
            return init_params(widths, head_from_string(head), seed);
        },
        py::arg("widths"), py::arg("head"), py::arg("seed") = 0);
    m.def(
        "forward", [](const ParamSet& p, const Vector& x) { return forward(p, x); }, py::arg("params"),
        py::arg("x"));
    m.def(
        "forward_batch", [](const ParamSet& p, const Matrix& xs) { return forward_batch(p, xs); },
        py::arg("params"), py::arg("inputs"), "Columns are samples.");
    m.def(
        "policy_sample",
        [](const ParamSet& policy, const Vector& state, const Vector& noise) {
            const PolicyOutput o = policy_sample(policy, state, noise);
            py::dict d;
            d["action"] = o.action;
            d["log_prob"] = o.log_prob;
            d["mean"] = o.mean;
            d["log_std"] = o.log_std;
            return d;
        },
        py::arg("policy"), py::arg("state"), py::arg("noise"));
    m.def("policy_mean_action", &policy_mean_action, py::arg("policy"), py::arg("state"));
    m.def("gate_value", &gate_value, py::arg("gate"), py::arg("state"));
    m.def(
        "q_value",
        [](const ParamSet& first, const ParamSet& second, const Vector& s, const Vector& a, bool use_min) {
            return q_value(CriticPair{first, second}, s, a, use_min ? Reduce::Min : Reduce::First);
        },
        py::arg("first"), py::arg("second"), py::arg("state"), py::arg("action"), py::arg("use_min") = true);
    m.def("polyak_update", &polyak_update, py::arg("target"), py::arg("online"), py::arg("tau"));
    m.def("gate_target", py::overload_cast<double>(&gate_target), py::arg("advantage"));

    py::class_<Nets>(m, "Nets")
        .def_readonly("policy", &Nets::policy)
        .def_property_readonly("critic", [](const Nets& n) { return py::make_tuple(n.critic.first, n.critic.second); })
        .def_property_readonly("target", [](const Nets& n) { return py::make_tuple(n.target.first, n.target.second); })
        .def_readonly("gate", &Nets::gate);
    m.def("make_nets", &make_nets, py::arg("obs_dim"), py::arg("action_dim"), py::arg("hidden"), py::arg("seed"));

    py::class_<Env>(m, "Env")
        .def(py::init([](const std::string& id) { return Env(env_id_from_string(id)); }), py::arg("env_id"))
        .def("reset", [](Env& e, std::uint64_t seed) { return step_dict(e.reset(seed)); }, py::arg("seed"))
        .def("step", [](Env& e, const Vector& a) { return step_dict(e.step(a)); }, py::arg("action"))
        .def("set_agent", [](Env& e, double x, double y) { e.set_agent({x, y}); }, py::arg("x"), py::arg("y"))
        .def_property_readonly("env_id", [](const Env& e) { return std::string(to_string(e.id())); })
        .def_property_readonly("horizon", &Env::horizon)
        .def_property_readonly("active", &Env::episode_active)
        .def_property_readonly("observation", &Env::observation)
        .def_property_readonly("agent", [](const Env& e) { return Vector(e.state().agent); })
        .def_property_readonly("ball", [](const Env& e) { return Vector(e.state().ball); })
        .def_property_readonly("goal", [](const Env& e) { return Vector(e.state().goal); })
        .def_property_readonly("mu", [](const Env& e) { return e.state().mu; })
        .def_property_readonly("t", [](const Env& e) { return e.state().t; })
        .def_property_readonly("unsafe", [](const Env& e) { return unsafe(e.params(), e.state()); })
        .def(
            "oracle_action",
            [](const Env& e, const std::string& mode) {
                return Vector(
                    oracle_action(e.params(), OracleParams{}, intervention_mode_from_string(mode), e.state()));
            },
            py::arg("mode") = "oracle")
        .def("reference_waypoint",
             [](const Env& e) { return Vector(reference_waypoint(e.params(), e.state())); });
    m.def("observation_dim", [](const std::string& id) { return observation_dim(env_id_from_string(id)); });

    m.def(
        "rolling_success", [](const std::vector<bool>& flags, int window) {
            auto buffer = std::make_unique<bool[]>(flags.size());
            std::copy(flags.begin(), flags.end(), buffer.get());
            return rolling_success(std::span<const bool>(buffer.get(), flags.size()), window);
        },
        py::arg("flags"), py::arg("window"));
    m.def("ema_intervention", &ema_intervention, py::arg("previous"), py::arg("episode_rate"), py::arg("k"));

    m.def(
        "config_text",
        [](const std::string& text, const std::map<std::string, std::string>& overrides) {
            return to_text(build_config(text, overrides));
        },
        py::arg("text") = "", py::arg("overrides") = std::map<std::string, std::string>{},
        "Canonical config text after applying overrides.");

    m.def(
        "train",
        [](const std::string& text, const std::map<std::string, std::string>& overrides) {
            const RunConfig config = build_config(text, overrides);
            TrainResult r;
            {
                py::gil_scoped_release release;
                r = train(config);
            }
            py::dict d;
            d["run_dir"] = r.run_dir;
            d["env_steps"] = r.env_steps;
            d["learner_steps"] = r.learner_steps;
            d["episodes"] = r.episodes.size();
            d["final_rolling_success"] = r.final_rolling_success;
            d["final_intervention_ema"] = r.final_intervention_ema;
            d["online_size"] = r.buffers.online.size();
            d["pref_size"] = r.buffers.pref.size();
            d["prefill_online"] = r.prefill_online;
            d["prefill_pref"] = r.prefill_pref;
            d["nets"] = r.nets;
            return d;
        },
        py::arg("text") = "", py::arg("overrides") = std::map<std::string, std::string>{},
        "Runs one training job from config text plus key=value overrides.");

    py::class_<Checkpoint>(m, "Checkpoint")
        .def_readonly("nets", &Checkpoint::nets)
        .def_readonly("has_gate", &Checkpoint::has_gate)
        .def_readonly("env_steps", &Checkpoint::env_steps)
        .def_readonly("learner_steps", &Checkpoint::learner_steps)
        .def_readonly("config_hash", &Checkpoint::config_hash)
        .def_property_readonly("mode", [](const Checkpoint& c) { return std::string(to_string(c.mode)); })
        .def_property_readonly("env_id", [](const Checkpoint& c) { return std::string(to_string(c.env_id)); })
        .def_property_readonly("observation_dim", &Checkpoint::observation_dim);
    m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

    m.def(
        "evaluate",
        [](const Checkpoint& c, const std::string& env_id, int n_episodes) {
            const auto seeds = held_out_seeds(n_episodes);
            return eval_dict(evaluate(c, env_id_from_string(env_id), EnvParams{}, seeds));
        },
        py::arg("checkpoint"), py::arg("env_id"), py::arg("n_episodes") = 50,
        "Deterministic evaluation on held-out seeds.");
    m.def(
        "export_gate_field",
        [](const Checkpoint& c, const std::string& env_id, int resolution) {
            const auto rows = export_gate_field(c, env_id_from_string(env_id), EnvParams{}, resolution);
            Matrix out(static_cast<Eigen::Index>(rows.size()), 3);
            for (std::size_t k = 0; k < rows.size(); ++k) out.row(k) << rows[k].x, rows[k].y, rows[k].beta;
            return out;
        },
        py::arg("checkpoint"), py::arg("env_id"), py::arg("resolution") = 50,
        "Rows of (x, y, beta) over the agent-position lattice.");
}
