#include "aows/searchspace.hpp"

#include <algorithm>
#include <cmath>

#include "aows/error.hpp"

namespace aows {

std::string to_string(LayerKind kind) {
    return kind == LayerKind::full_conv ? "full_conv" : "depthwise_separable";
}

LayerKind layer_kind_from_string(const std::string& name) {
    if (name == "full_conv") return LayerKind::full_conv;
    if (name == "depthwise_separable") return LayerKind::depthwise_separable;
    throw ValidationError("unknown layer kind '" + name + "'");
}

namespace {

void check_choice_set(const std::vector<int>& set, std::size_t boundary) {
    const std::string where = "boundary " + std::to_string(boundary);
    if (set.empty()) throw ValidationError(where + ": empty choice set");
    for (std::size_t k = 0; k < set.size(); ++k) {
        if (set[k] < 1) throw ValidationError(where + ": channel counts must be positive");
        if (k > 0 && set[k] <= set[k - 1])
            throw ValidationError(where + ": choices must be strictly ascending");
    }
}

}  // namespace

SearchSpace::SearchSpace(int input_channels, int output_channels, std::vector<LayerParams> layers,
                         std::vector<std::vector<int>> interior_choices)
    : layers_(std::move(layers)) {
    if (layers_.empty()) throw ValidationError("search space needs at least one layer");
    if (interior_choices.size() + 1 != layers_.size())
        throw ValidationError("expected " + std::to_string(layers_.size() - 1) +
                              " interior choice sets, got " +
                              std::to_string(interior_choices.size()));
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& p = layers_[i];
        if (p.height < 1 || p.width < 1 || p.stride < 1 || p.kernel < 1)
            throw ValidationError("layer " + std::to_string(i) +
                                  ": height, width, stride and kernel must be >= 1");
    }
    choices_.reserve(layers_.size() + 1);
    choices_.push_back({input_channels});
    for (auto& set : interior_choices) choices_.push_back(std::move(set));
    choices_.push_back({output_channels});
    for (std::size_t b = 0; b < choices_.size(); ++b) check_choice_set(choices_[b], b);
}

std::optional<std::size_t> SearchSpace::index_of(std::size_t boundary, int channels) const {
    const auto& set = choices_.at(boundary);
    auto it = std::lower_bound(set.begin(), set.end(), channels);
    if (it == set.end() || *it != channels) return std::nullopt;
    return static_cast<std::size_t>(it - set.begin());
}

double SearchSpace::size() const {
    double total = 1.0;
    for (const auto& set : choices_) total *= static_cast<double>(set.size());
    return total;
}

ChannelConfig SearchSpace::max_config() const {
    ChannelConfig c;
    for (const auto& set : choices_) c.channels.push_back(set.back());
    return c;
}

ChannelConfig SearchSpace::min_config() const {
    ChannelConfig c;
    for (const auto& set : choices_) c.channels.push_back(set.front());
    return c;
}

ChoicePath SearchSpace::path_of(const ChannelConfig& config) const {
    if (config.channels.size() != choices_.size())
        throw ValidationError("config has " + std::to_string(config.channels.size()) +
                              " entries, space has " + std::to_string(choices_.size()) +
                              " boundaries");
    ChoicePath path(choices_.size());
    for (std::size_t b = 0; b < choices_.size(); ++b) {
        auto idx = index_of(b, config.channels[b]);
        if (!idx)
            throw ValidationError("config entry " + std::to_string(b) + " = " +
                                  std::to_string(config.channels[b]) + " is not a valid choice");
        path[b] = *idx;
    }
    return path;
}

ChannelConfig SearchSpace::config_of(const ChoicePath& path) const {
    if (path.size() != choices_.size()) throw ValidationError("choice path has wrong length");
    ChannelConfig c;
    c.channels.reserve(path.size());
    for (std::size_t b = 0; b < path.size(); ++b) c.channels.push_back(choices_[b].at(path[b]));
    return c;
}

ChannelConfig SearchSpace::from_interior(std::span<const int> interior) const {
    if (interior.size() + 2 != choices_.size())
        throw ValidationError("expected " + std::to_string(choices_.size() - 2) +
                              " interior channel counts, got " + std::to_string(interior.size()));
    ChannelConfig c;
    c.channels.push_back(input_channels());
    c.channels.insert(c.channels.end(), interior.begin(), interior.end());
    c.channels.push_back(output_channels());
    path_of(c);
    return c;
}

std::vector<int> SearchSpace::interior_of(const ChannelConfig& config) const {
    path_of(config);
    return {config.channels.begin() + 1, config.channels.end() - 1};
}

bool validate(const ChannelConfig& config, const SearchSpace& space) {
    if (config.channels.size() != space.num_boundaries()) return false;
    for (std::size_t b = 0; b < config.channels.size(); ++b)
        if (!space.index_of(b, config.channels[b])) return false;
    return true;
}

void for_each_config(const SearchSpace& space, std::uint64_t cap,
                     const std::function<void(const ChoicePath&)>& visit) {
    const double size = space.size();
    if (size > static_cast<double>(cap)) throw EnumerationLimitError(size, cap);
    const std::size_t nb = space.num_boundaries();
    ChoicePath path(nb, 0);
    while (true) {
        visit(path);
        // odometer, last boundary fastest
        std::size_t b = nb;
        while (b > 0) {
            --b;
            if (++path[b] < space.choices(b).size()) break;
            path[b] = 0;
            if (b == 0) return;
        }
    }
}

std::vector<ChannelConfig> enumerate(const SearchSpace& space, std::uint64_t cap) {
    std::vector<ChannelConfig> out;
    for_each_config(space, cap, [&](const ChoicePath& p) { out.push_back(space.config_of(p)); });
    return out;
}

double layer_flops(const LayerParams& p, int c_in, int c_out) {
    // Output resolution (H/s)·(W/s), kept fractional so the table stays exact.
    const double out_area = static_cast<double>(p.height) * p.width / (p.stride * p.stride);
    const double k2 = static_cast<double>(p.kernel) * p.kernel;
    const double cin = c_in;
    const double cout = c_out;
    if (p.kind == LayerKind::full_conv) return cin * cout * out_area * k2;
    // depthwise k×k on c_in channels, then pointwise c_in -> c_out
    return cin * out_area * k2 + cin * cout * out_area;
}

double flops(const ChannelConfig& config, const SearchSpace& space) {
    space.path_of(config);
    double total = 0.0;
    for (std::size_t i = 0; i < space.num_layers(); ++i)
        total += layer_flops(space.layer(i), config.channels[i], config.channels[i + 1]);
    return total;
}

}  // namespace aows
