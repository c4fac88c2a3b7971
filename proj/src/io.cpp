#include "rapo/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace rapo
{

Json load_json(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open " + path);
    }
    try {
        return Json::parse(in);
    }
    catch (const Json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

void save_json(const std::string& path, const Json& doc)
{
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("cannot write " + path);
    }
    out << doc.dump(2) << '\n';
}

namespace
{

const char* kind(const Json& j)
{
    if (j.is_number()) {
        return "number";
    }
    if (j.is_boolean()) {
        return "bool";
    }
    if (j.is_string()) {
        return "string";
    }
    if (j.is_array()) {
        return "array";
    }
    if (j.is_object()) {
        return "object";
    }
    return "null";
}

} // namespace

Json merge_config(const Json& defaults, const Json& user, const std::string& path)
{
    if (defaults.is_null()) {
        return user;
    }
    if (std::string(kind(defaults)) != kind(user)) {
        throw ConfigError("config key '" + (path.empty() ? std::string("<root>") : path) + "' expects " +
                          kind(defaults) + ", got " + kind(user));
    }
    if (!defaults.is_object()) {
        return user;
    }
    Json out = defaults;
    for (auto it = user.begin(); it != user.end(); ++it) {
        const std::string key = path.empty() ? it.key() : path + "." + it.key();
        if (!defaults.contains(it.key())) {
            throw ConfigError("unknown config key '" + key + "'");
        }
        out[it.key()] = merge_config(defaults[it.key()], it.value(), key);
    }
    return out;
}

void apply_override(Json& doc, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override '" + assignment + "' is not of the form key.path=value");
    }
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    Json value;
    try {
        value = Json::parse(text);
    }
    catch (const Json::parse_error&) {
        value = text;
    }
    Json patch = value;
    std::vector<std::string> parts;
    std::stringstream ss(key);
    for (std::string part; std::getline(ss, part, '.');) {
        parts.push_back(part);
    }
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
        Json wrap = Json::object();
        wrap[*it] = patch;
        patch = wrap;
    }
    doc = merge_config(doc, patch);
}

std::vector<double> parse_number_list(const std::string& text)
{
    std::vector<double> out;
    std::stringstream ss(text);
    for (std::string tok; std::getline(ss, tok, ',');) {
        const auto first = tok.find_first_not_of(" \t\r\n");
        if (first == std::string::npos) {
            throw ConfigError("empty entry in number list '" + text + "'");
        }
        tok = tok.substr(first, tok.find_last_not_of(" \t\r\n") - first + 1);
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(tok, &used);
        }
        catch (const std::exception&) {
            used = 0;
        }
        if (used != tok.size() || !std::isfinite(v)) {
            throw ConfigError("not a finite number: '" + tok + "'");
        }
        out.push_back(v);
    }
    if (out.empty()) {
        throw ConfigError("empty number list");
    }
    return out;
}

VectorXd to_vector(const std::vector<double>& v)
{
    return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const VectorXd& v)
{
    return {v.data(), v.data() + v.size()};
}

std::string format_double(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", x);
    return buf;
}

std::size_t CsvTable::column(const std::string& name) const
{
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) {
            return i;
        }
    }
    throw ConfigError("csv has no column '" + name + "'");
}

void write_csv(std::ostream& os, const CsvTable& table)
{
    for (std::size_t i = 0; i < table.header.size(); ++i) {
        os << (i ? "," : "") << table.header[i];
    }
    os << '\n';
    for (const auto& row : table.rows) {
        if (row.size() != table.header.size()) {
            throw DomainError("csv row width differs from header");
        }
        for (std::size_t i = 0; i < row.size(); ++i) {
            os << (i ? "," : "") << format_double(row[i]);
        }
        os << '\n';
    }
}

void write_csv(const std::string& path, const CsvTable& table)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ConfigError("cannot write " + path);
    }
    write_csv(out, table);
}

CsvTable read_csv(std::istream& is)
{
    CsvTable t;
    std::string line;
    if (!std::getline(is, line)) {
        throw ConfigError("csv: missing header");
    }
    std::stringstream hs(line);
    for (std::string h; std::getline(hs, h, ',');) {
        t.header.push_back(h);
    }
    while (std::getline(is, line)) {
        if (line.empty()) {
            continue;
        }
        const std::vector<double> row = parse_number_list(line);
        if (row.size() != t.header.size()) {
            throw ConfigError("csv: row width differs from header");
        }
        t.rows.push_back(row);
    }
    return t;
}

CsvTable read_csv(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open " + path);
    }
    return read_csv(in);
}

Json matrix_to_json(const MatrixXd& m)
{
    Json out = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            row.push_back(m(r, c));
        }
        out.push_back(row);
    }
    return out;
}

MatrixXd matrix_from_json(const Json& doc, const std::string& what)
{
    if (!doc.is_array() || doc.empty() || !doc[0].is_array()) {
        throw ConfigError(what + ": expected a nonempty array of rows");
    }
    const auto rows = static_cast<Eigen::Index>(doc.size());
    const auto cols = static_cast<Eigen::Index>(doc[0].size());
    MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const Json& row = doc[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
            throw ConfigError(what + ": ragged row " + std::to_string(r));
        }
        for (Eigen::Index c = 0; c < cols; ++c) {
            const Json& x = row[static_cast<std::size_t>(c)];
            if (!x.is_number()) {
                throw ConfigError(what + ": non-numeric entry at row " + std::to_string(r));
            }
            m(r, c) = x.get<double>();
        }
    }
    return m;
}

namespace
{

VectorXd vector_from_json(const Json& doc, const std::string& what)
{
    if (!doc.is_array()) {
        throw ConfigError(what + ": expected an array");
    }
    VectorXd v(static_cast<Eigen::Index>(doc.size()));
    for (std::size_t i = 0; i < doc.size(); ++i) {
        if (!doc[i].is_number()) {
            throw ConfigError(what + ": non-numeric entry " + std::to_string(i));
        }
        v(static_cast<Eigen::Index>(i)) = doc[i].get<double>();
    }
    return v;
}

void require_keys(const Json& doc, const std::set<std::string>& allowed, const std::string& what)
{
    if (!doc.is_object()) {
        throw ConfigError(what + ": expected an object");
    }
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        if (!allowed.count(it.key())) {
            throw ConfigError(what + ": unknown key '" + it.key() + "'");
        }
    }
}

template <class T>
T field(const Json& doc, const char* key, const std::string& what)
{
    if (!doc.contains(key)) {
        throw ConfigError(what + ": missing '" + key + "'");
    }
    try {
        return doc.at(key).get<T>();
    }
    catch (const Json::exception&) {
        throw ConfigError(what + ": bad type for '" + key + "'");
    }
}

} // namespace

Json mdp_to_json(const TabularMdp& mdp)
{
    return Json{{"n_states", mdp.n_states},
                {"n_actions", mdp.n_actions},
                {"gamma", mdp.gamma},
                {"kernel", matrix_to_json(mdp.kernel)},
                {"rewards", matrix_to_json(mdp.rewards)},
                {"initial_dist", to_std(mdp.initial_dist)}};
}

TabularMdp mdp_from_json(const Json& doc)
{
    require_keys(doc, {"n_states", "n_actions", "gamma", "kernel", "rewards", "initial_dist"}, "mdp");
    TabularMdp mdp;
    mdp.n_states = field<int>(doc, "n_states", "mdp");
    mdp.n_actions = field<int>(doc, "n_actions", "mdp");
    mdp.gamma = field<double>(doc, "gamma", "mdp");
    mdp.kernel = matrix_from_json(doc.at("kernel"), "mdp.kernel");
    mdp.rewards = matrix_from_json(doc.at("rewards"), "mdp.rewards");
    mdp.initial_dist = vector_from_json(doc.at("initial_dist"), "mdp.initial_dist");
    try {
        mdp.validate();
    }
    catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
    return mdp;
}

void to_json(Json& j, const BridgeParams& p)
{
    j = Json{{"length", p.length}, {"corridor_rows", p.corridor_rows}, {"slip", p.slip}, {"gamma", p.gamma}};
}

void from_json(const Json& j, BridgeParams& p)
{
    const Json merged = merge_config(Json(BridgeParams{}), j, "world");
    p.length = merged.at("length").get<int>();
    p.corridor_rows = merged.at("corridor_rows").get<int>();
    p.slip = merged.at("slip").get<double>();
    p.gamma = merged.at("gamma").get<double>();
}

#define RAPO_TRAIN_FIELDS(X)                                                                                          \
    X(updates)                                                                                                        \
    X(rollout_length)                                                                                                 \
    X(episode_horizon)                                                                                                \
    X(epsilon)                                                                                                        \
    X(kappa)                                                                                                          \
    X(samples_m)                                                                                                      \
    X(gamma)                                                                                                          \
    X(gae_lambda)                                                                                                     \
    X(clip)                                                                                                           \
    X(actor_lr)                                                                                                       \
    X(critic_lr)                                                                                                      \
    X(epochs)                                                                                                         \
    X(minibatches)                                                                                                    \
    X(entropy_coef)                                                                                                   \
    X(value_coef)                                                                                                     \
    X(normalize_advantages)                                                                                           \
    X(use_advnet)                                                                                                     \
    X(use_reweighting)                                                                                                \
    X(advnet_steps)                                                                                                   \
    X(advnet_lr)                                                                                                      \
    X(lambda_kl)                                                                                                      \
    X(lambda_sup)                                                                                                     \
    X(advnet_state_only)                                                                                              \
    X(advnet_offset)                                                                                                  \
    X(projection_tol)                                                                                                 \
    X(projection_max_iter)                                                                                            \
    X(bisection_iters)                                                                                                \
    X(beta_max)                                                                                                       \
    X(reweight_tol)                                                                                                   \
    X(ema_decay)                                                                                                      \
    X(scorer_samples)                                                                                                 \
    X(chain_from_previous)                                                                                            \
    X(snapshot_every)                                                                                                 \
    X(seed)

void to_json(Json& j, const TrainConfig& c)
{
    j = Json::object();
#define RAPO_PUT(name) j[#name] = c.name;
    RAPO_TRAIN_FIELDS(RAPO_PUT)
#undef RAPO_PUT
}

void from_json(const Json& j, TrainConfig& c)
{
    const Json merged = merge_config(Json(TrainConfig{}), j, "train");
#define RAPO_GET(name) merged.at(#name).get_to(c.name);
    RAPO_TRAIN_FIELDS(RAPO_GET)
#undef RAPO_GET
}

#undef RAPO_TRAIN_FIELDS

void to_json(Json& j, const UpdateMetrics& m)
{
    j = Json{{"update", m.update},
             {"w_entropy", m.w_entropy},
             {"kl_w", m.kl_w},
             {"beta", m.beta},
             {"mean_eta", m.mean_eta},
             {"mean_target_kl", m.mean_target_kl},
             {"max_target_kl", m.max_target_kl},
             {"mean_v_rob", m.mean_v_rob},
             {"mean_target", m.mean_target},
             {"advnet_loss", m.advnet_loss},
             {"advnet_eta_error", m.advnet_eta_error},
             {"actor_loss", m.actor_loss},
             {"critic_loss", m.critic_loss},
             {"total_loss", m.total_loss},
             {"entropy", m.entropy},
             {"clip_fraction", m.clip_fraction},
             {"mean_episode_return", m.mean_episode_return},
             {"episodes", m.episodes}};
}

Json advnet_to_json(const AdvNetParams& p)
{
    return Json{{"input_dim", p.input_dim()},
                {"w1", matrix_to_json(p.w1)},
                {"b1", to_std(p.b1)},
                {"w2", matrix_to_json(p.w2)},
                {"b2", to_std(p.b2)},
                {"w3", matrix_to_json(p.w3)},
                {"b3", to_std(p.b3)}};
}

AdvNetParams advnet_from_json(const Json& doc)
{
    require_keys(doc, {"input_dim", "w1", "b1", "w2", "b2", "w3", "b3"}, "advnet");
    const int d = field<int>(doc, "input_dim", "advnet");
    AdvNetParams p = AdvNetParams::zeros(d);
    const MatrixXd w1 = matrix_from_json(doc.at("w1"), "advnet.w1");
    const MatrixXd w2 = matrix_from_json(doc.at("w2"), "advnet.w2");
    const MatrixXd w3 = matrix_from_json(doc.at("w3"), "advnet.w3");
    const VectorXd b1 = vector_from_json(doc.at("b1"), "advnet.b1");
    const VectorXd b2 = vector_from_json(doc.at("b2"), "advnet.b2");
    const VectorXd b3 = vector_from_json(doc.at("b3"), "advnet.b3");
    if (w1.rows() != p.w1.rows() || w1.cols() != p.w1.cols() || w2.rows() != p.w2.rows() ||
        w2.cols() != p.w2.cols() || w3.rows() != p.w3.rows() || w3.cols() != p.w3.cols() ||
        b1.size() != p.b1.size() || b2.size() != p.b2.size() || b3.size() != p.b3.size()) {
        throw ConfigError("advnet: parameter shapes do not match input_dim " + std::to_string(d));
    }
    p.w1 = w1;
    p.b1 = b1;
    p.w2 = w2;
    p.b2 = b2;
    p.w3 = w3;
    p.b3 = b3;
    return p;
}

Json checkpoint_to_json(const TrainResult& r)
{
    Json doc{{"logits", matrix_to_json(r.policy.logits)},
             {"critic", to_std(r.policy.critic)},
             {"policy", matrix_to_json(r.policy.probs())}};
    if (r.advnet.w1.size() > 0) {
        doc["advnet"] = advnet_to_json(r.advnet);
    }
    if (!r.mixture_history.empty()) {
        doc["mixture_weights"] = to_std(r.mixture_history.back());
    }
    return doc;
}

PolicyTable checkpoint_policy(const Json& doc)
{
    if (!doc.is_object() || !doc.contains("policy")) {
        throw ConfigError("checkpoint: missing 'policy'");
    }
    return matrix_from_json(doc.at("policy"), "checkpoint.policy");
}

Json snapshots_to_json(const TrainResult& r)
{
    Json snaps = Json::array();
    for (std::size_t i = 0; i < r.snapshot_updates.size(); ++i) {
        snaps.push_back(Json{{"update", r.snapshot_updates[i]},
                             {"critic", to_std(r.critic_snapshots[i])},
                             {"policy", matrix_to_json(r.policy_snapshots[i])}});
    }
    return Json{{"snapshots", snaps}};
}

void snapshots_from_json(const Json& doc, std::vector<int>& updates, std::vector<VectorXd>& critics,
                         std::vector<PolicyTable>& policies)
{
    if (!doc.is_object() || !doc.contains("snapshots") || !doc.at("snapshots").is_array()) {
        throw ConfigError("snapshots: missing 'snapshots' array");
    }
    updates.clear();
    critics.clear();
    policies.clear();
    for (const Json& s : doc.at("snapshots")) {
        require_keys(s, {"update", "critic", "policy"}, "snapshot");
        updates.push_back(field<int>(s, "update", "snapshot"));
        critics.push_back(vector_from_json(s.at("critic"), "snapshot.critic"));
        policies.push_back(matrix_from_json(s.at("policy"), "snapshot.policy"));
    }
}

TabularMdp world_from_json(const Json& doc)
{
    if (!doc.is_object() || !doc.contains("type") || !doc.at("type").is_string()) {
        throw ConfigError("world: expected an object with a string 'type'");
    }
    const std::string type = doc.at("type").get<std::string>();
    Json rest = doc;
    rest.erase("type");
    try {
        if (type == "bridge") {
            return bridge_world(rest.get<BridgeParams>());
        }
        if (type == "chain") {
            require_keys(rest, {"n", "stay", "gamma"}, "world");
            return chain_world(field<int>(rest, "n", "world"), field<double>(rest, "stay", "world"),
                               field<double>(rest, "gamma", "world"));
        }
        if (type == "file") {
            require_keys(rest, {"path"}, "world");
            return mdp_from_json(load_json(field<std::string>(rest, "path", "world")));
        }
    }
    catch (const DomainError& e) {
        throw ConfigError(std::string("world: ") + e.what());
    }
    throw ConfigError("world: unknown type '" + type + "' (bridge, chain, file)");
}

VectorXd scale_grid_from_json(const Json& doc)
{
    if (doc.is_array()) {
        return vector_from_json(doc, "scales");
    }
    require_keys(doc, {"lo", "hi", "count"}, "scales");
    const int count = field<int>(doc, "count", "scales");
    if (count < 1) {
        throw ConfigError("scales: count must be positive");
    }
    const double lo = field<double>(doc, "lo", "scales");
    const double hi = field<double>(doc, "hi", "scales");
    if (count == 1) {
        return VectorXd::Constant(1, lo);
    }
    return VectorXd::LinSpaced(count, lo, hi);
}

} // namespace rapo
