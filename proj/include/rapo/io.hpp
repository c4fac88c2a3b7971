#ifndef RAPO_IO_HPP
#define RAPO_IO_HPP

#include "rapo/advnet.hpp"
#include "rapo/ensemble.hpp"
#include "rapo/gridworld.hpp"
#include "rapo/mdp.hpp"
#include "rapo/rapo.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace rapo
{

using Json = nlohmann::json;

/// Throws ConfigError on a missing file or malformed JSON.
Json load_json(const std::string& path);
void save_json(const std::string& path, const Json& doc);

/// Overlay `user` onto `defaults`. Keys absent from the defaults, and values whose JSON kind
/// (number, bool, string, array, object) differs from the default, throw ConfigError naming the path.
/// A null default accepts any value.
Json merge_config(const Json& defaults, const Json& user, const std::string& path = "");

/// "a.b.c=value"; value is parsed as JSON, falling back to a plain string. The path must exist.
void apply_override(Json& doc, const std::string& assignment);

/// Comma-separated doubles; throws ConfigError on anything unparsable or non-finite.
std::vector<double> parse_number_list(const std::string& text);
VectorXd to_vector(const std::vector<double>& v);
std::vector<double> to_std(const VectorXd& v);

/// Shortest-trip text form with 9 significant digits.
std::string format_double(double x);

struct CsvTable
{
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::size_t column(const std::string& name) const;
};

void write_csv(std::ostream& os, const CsvTable& table);
void write_csv(const std::string& path, const CsvTable& table);
CsvTable read_csv(std::istream& is);
CsvTable read_csv(const std::string& path);

Json mdp_to_json(const TabularMdp& mdp);
TabularMdp mdp_from_json(const Json& doc);

Json matrix_to_json(const MatrixXd& m);
MatrixXd matrix_from_json(const Json& doc, const std::string& what);

void to_json(Json& j, const BridgeParams& p);
void from_json(const Json& j, BridgeParams& p);
void to_json(Json& j, const TrainConfig& c);
void from_json(const Json& j, TrainConfig& c);
void to_json(Json& j, const UpdateMetrics& m);

Json advnet_to_json(const AdvNetParams& p);
AdvNetParams advnet_from_json(const Json& doc);

/// Final policy, critic, AdvNet and mixture weights of a run.
Json checkpoint_to_json(const TrainResult& r);
PolicyTable checkpoint_policy(const Json& doc);

/// Critic and policy snapshots with their update indices.
Json snapshots_to_json(const TrainResult& r);
void snapshots_from_json(const Json& doc, std::vector<int>& updates, std::vector<VectorXd>& critics,
                         std::vector<PolicyTable>& policies);

/// {"type": "bridge", ...BridgeParams} or {"type": "chain", "n", "stay", "gamma"} or {"type": "file", "path"}.
TabularMdp world_from_json(const Json& doc);

/// {"lo", "hi", "count"} or an explicit array.
VectorXd scale_grid_from_json(const Json& doc);

} // namespace rapo

#endif
