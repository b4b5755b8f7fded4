#pragma once

#include <string>

#include "xdiff/net.hpp"

namespace xdiff {

/// Network checkpoint, little-endian binary:
///   header:    magic "XDIFFNET" (8 bytes), u32 version, u32 layer count
///   per layer: u32 fan_in, u32 fan_out, u32 activation tag,
///              f64 weights row-major (fan_out rows of fan_in),
///              f64 biases (fan_out)
/// Byte order is explicit, so files are portable across hosts.
inline constexpr char kNetMagic[8] = {'X', 'D', 'I', 'F', 'F', 'N', 'E', 'T'};
inline constexpr uint32_t kNetFormatVersion = 1;

void save_net(const FeedForwardNet& net, const std::string& path);
FeedForwardNet load_net(const std::string& path);

}  // namespace xdiff
