#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "solar_ddpg/neural.hpp"

namespace solar_ddpg {

/// Versioned binary container for networks and optimizer state.
///
/// Layout: 8-byte magic "SDDPGCKP", uint32 format version, uint64 header
/// length, a JSON header, then little-endian float64 payload. The header
/// describes every entry (layer sizes, activation tags, payload offset and
/// count) and carries free-form metadata such as hyperparameters and seeds.
/// Weights are stored column-major per layer, followed by the bias.
class TensorArchive {
public:
    static constexpr std::uint32_t kVersion = 1;

    void put_network(const std::string& name, const nn::MlpParams<double>& params);
    void put_adam(const std::string& name, const nn::AdamState<double>& state);

    nn::MlpParams<double> network(const std::string& name) const;
    nn::AdamState<double> adam(const std::string& name) const;
    bool has(const std::string& name) const { return entries_.count(name) != 0; }

    nlohmann::json& meta() { return meta_; }
    const nlohmann::json& meta() const { return meta_; }

    void write(std::ostream& out) const;
    static TensorArchive read(std::istream& in);
    void save(const std::filesystem::path& path) const;
    static TensorArchive load(const std::filesystem::path& path);

private:
    struct Entry {
        std::string kind;  // "network" or "adam"
        std::vector<int> sizes;
        std::string hidden_activation;
        std::string output_activation;
        nlohmann::json extra;
        std::vector<double> data;
    };
    std::map<std::string, Entry> entries_;
    nlohmann::json meta_ = nlohmann::json::object();
};

}  // namespace solar_ddpg
