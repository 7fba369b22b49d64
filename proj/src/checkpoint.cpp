#include "solar_ddpg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "solar_ddpg/errors.hpp"

namespace solar_ddpg {

static_assert(std::endian::native == std::endian::little, "checkpoint payload assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'S', 'D', 'D', 'P', 'G', 'C', 'K', 'P'};

std::vector<double> flatten(const nn::MlpParams<double>& p) {
    std::vector<double> out;
    out.reserve(p.parameter_count());
    auto copy = p;
    copy.for_each([&](double& v) { out.push_back(v); });
    return out;
}

nn::MlpParams<double> unflatten(const std::vector<int>& sizes, nn::Activation hidden, nn::Activation output,
                                const double* data, std::size_t count) {
    nn::MlpParams<double> p;
    p.hidden_activation = hidden;
    p.output_activation = output;
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i)
        p.layers.push_back({nn::Matrix<double>(sizes[i + 1], sizes[i]), nn::Vector<double>(sizes[i + 1])});
    if (p.parameter_count() != count) throw FormatError("checkpoint entry size does not match its layer sizes");
    std::size_t k = 0;
    p.for_each([&](double& v) { v = data[k++]; });
    return p;
}

}  // namespace

void TensorArchive::put_network(const std::string& name, const nn::MlpParams<double>& params) {
    Entry e;
    e.kind = "network";
    e.sizes = params.layer_sizes();
    e.hidden_activation = nn::activation_name(params.hidden_activation);
    e.output_activation = nn::activation_name(params.output_activation);
    e.data = flatten(params);
    entries_[name] = std::move(e);
}

void TensorArchive::put_adam(const std::string& name, const nn::AdamState<double>& state) {
    Entry e;
    e.kind = "adam";
    e.sizes = state.first_moment.layer_sizes();
    e.hidden_activation = nn::activation_name(state.first_moment.hidden_activation);
    e.output_activation = nn::activation_name(state.first_moment.output_activation);
    e.extra = {{"step", state.step}, {"beta1", state.beta1}, {"beta2", state.beta2}, {"epsilon", state.epsilon}};
    e.data = flatten(state.first_moment);
    auto second = flatten(state.second_moment);
    e.data.insert(e.data.end(), second.begin(), second.end());
    entries_[name] = std::move(e);
}

nn::MlpParams<double> TensorArchive::network(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end() || it->second.kind != "network")
        throw NotFoundError("checkpoint has no network '" + name + "'");
    const auto& e = it->second;
    return unflatten(e.sizes, nn::activation_from_name(e.hidden_activation),
                     nn::activation_from_name(e.output_activation), e.data.data(), e.data.size());
}

nn::AdamState<double> TensorArchive::adam(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end() || it->second.kind != "adam")
        throw NotFoundError("checkpoint has no optimizer state '" + name + "'");
    const auto& e = it->second;
    const auto hidden = nn::activation_from_name(e.hidden_activation);
    const auto output = nn::activation_from_name(e.output_activation);
    if (e.data.size() % 2 != 0) throw FormatError("optimizer entry has odd payload length");
    const std::size_t half = e.data.size() / 2;
    nn::AdamState<double> s;
    s.first_moment = unflatten(e.sizes, hidden, output, e.data.data(), half);
    s.second_moment = unflatten(e.sizes, hidden, output, e.data.data() + half, half);
    s.step = e.extra.at("step").get<std::int64_t>();
    s.beta1 = e.extra.at("beta1").get<double>();
    s.beta2 = e.extra.at("beta2").get<double>();
    s.epsilon = e.extra.at("epsilon").get<double>();
    return s;
}

void TensorArchive::write(std::ostream& out) const {
    nlohmann::json header;
    header["format"] = "solar_ddpg.checkpoint";
    header["version"] = kVersion;
    header["meta"] = meta_;
    nlohmann::json list = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, e] : entries_) {
        nlohmann::json j{{"name", name},
                         {"kind", e.kind},
                         {"sizes", e.sizes},
                         {"hidden_activation", e.hidden_activation},
                         {"output_activation", e.output_activation},
                         {"offset", offset},
                         {"count", e.data.size()}};
        if (!e.extra.is_null()) j["extra"] = e.extra;
        list.push_back(std::move(j));
        offset += e.data.size();
    }
    header["entries"] = std::move(list);
    const std::string text = header.dump(1);

    out.write(kMagic, sizeof(kMagic));
    const std::uint32_t version = kVersion;
    const std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, e] : entries_)
        out.write(reinterpret_cast<const char*>(e.data.data()),
                  static_cast<std::streamsize>(e.data.size() * sizeof(double)));
    if (!out) throw IoError("failed writing checkpoint");
}

TensorArchive TensorArchive::read(std::istream& in) {
    char magic[8];
    std::uint32_t version = 0;
    std::uint64_t len = 0;
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw FormatError("not a checkpoint file (bad magic)");
    if (!in.read(reinterpret_cast<char*>(&version), sizeof(version)) || version != kVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(version));
    if (!in.read(reinterpret_cast<char*>(&len), sizeof(len)) || len > (1u << 30))
        throw FormatError("bad checkpoint header length");
    std::string text(len, '\0');
    if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw FormatError("truncated checkpoint header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad checkpoint header: ") + e.what());
    }

    TensorArchive archive;
    archive.meta_ = header.value("meta", nlohmann::json::object());
    std::uint64_t expected_offset = 0;
    for (const auto& j : header.at("entries")) {
        Entry e;
        e.kind = j.at("kind").get<std::string>();
        e.sizes = j.at("sizes").get<std::vector<int>>();
        e.hidden_activation = j.at("hidden_activation").get<std::string>();
        e.output_activation = j.at("output_activation").get<std::string>();
        if (j.contains("extra")) e.extra = j.at("extra");
        const auto offset = j.at("offset").get<std::uint64_t>();
        const auto count = j.at("count").get<std::uint64_t>();
        if (offset != expected_offset) throw FormatError("checkpoint entries out of order");
        e.data.resize(count);
        if (!in.read(reinterpret_cast<char*>(e.data.data()), static_cast<std::streamsize>(count * sizeof(double))))
            throw FormatError("truncated checkpoint payload");
        expected_offset += count;
        archive.entries_[j.at("name").get<std::string>()] = std::move(e);
    }
    return archive;
}

void TensorArchive::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    write(out);
}

TensorArchive TensorArchive::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("checkpoint " + path.string() + " not found");
    return read(in);
}

}  // namespace solar_ddpg
