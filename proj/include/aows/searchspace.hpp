#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace aows {

enum class LayerKind { full_conv, depthwise_separable };

std::string to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& name);

/// Fixed shape parameters of one layer. height/width are the layer's input dims.
struct LayerParams {
    int height = 1;
    int width = 1;
    int stride = 1;
    int kernel = 1;
    LayerKind kind = LayerKind::full_conv;

    bool operator==(const LayerParams&) const = default;
};

/// One channel count per boundary c_0..c_n.
struct ChannelConfig {
    std::vector<int> channels;

    auto operator<=>(const ChannelConfig&) const = default;
};

/// Choice indices per boundary, the decoder-side view of a ChannelConfig.
using ChoicePath = std::vector<std::size_t>;

/// A chain of n layers with n+1 channel boundaries. Boundary 0 is the network
/// input and boundary n its output; both are singleton choice sets.
class SearchSpace {
public:
    /// `interior_choices[k]` is the choice set of boundary k+1. There must be exactly
    /// `layers.size() - 1` of them.
    SearchSpace(int input_channels, int output_channels, std::vector<LayerParams> layers,
                std::vector<std::vector<int>> interior_choices);

    std::size_t num_layers() const noexcept { return layers_.size(); }
    std::size_t num_boundaries() const noexcept { return choices_.size(); }
    int input_channels() const noexcept { return choices_.front().front(); }
    int output_channels() const noexcept { return choices_.back().front(); }

    const LayerParams& layer(std::size_t i) const { return layers_.at(i); }
    const std::vector<LayerParams>& layers() const noexcept { return layers_; }
    const std::vector<int>& choices(std::size_t boundary) const { return choices_.at(boundary); }
    const std::vector<std::vector<int>>& all_choices() const noexcept { return choices_; }

    std::optional<std::size_t> index_of(std::size_t boundary, int channels) const;

    /// Number of configurations, as a double so huge spaces do not overflow.
    double size() const;

    ChannelConfig max_config() const;
    ChannelConfig min_config() const;

    /// Throws ValidationError if the config is not valid in this space.
    ChoicePath path_of(const ChannelConfig& config) const;
    ChannelConfig config_of(const ChoicePath& path) const;

    /// Expands interior channels c_1..c_{n-1} with the forced boundaries.
    ChannelConfig from_interior(std::span<const int> interior) const;
    std::vector<int> interior_of(const ChannelConfig& config) const;

    bool operator==(const SearchSpace&) const = default;

private:
    std::vector<LayerParams> layers_;
    std::vector<std::vector<int>> choices_;
};

bool validate(const ChannelConfig& config, const SearchSpace& space);

/// Visits every configuration once in lexicographic order of choice indices.
/// Throws EnumerationLimitError when the space holds more than `cap` configurations.
void for_each_config(const SearchSpace& space, std::uint64_t cap,
                     const std::function<void(const ChoicePath&)>& visit);
std::vector<ChannelConfig> enumerate(const SearchSpace& space, std::uint64_t cap);

/// FLOPs of one layer mapping c_in to c_out channels.
double layer_flops(const LayerParams& params, int c_in, int c_out);
double flops(const ChannelConfig& config, const SearchSpace& space);

}  // namespace aows
