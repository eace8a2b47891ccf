#pragma once

#include <array>
#include <string>
#include <vector>

#include "cpbigan/data.hpp"
#include "cpbigan/diff/layers.hpp"

// Desk-scale topologies.
//
// Factor target (A = 14 risk factors, B = one image):
//   q^A  4 dense layers  [x*m, m] (28) -> h -> h -> h -> d_z
//   g^A  4 dense layers  [z ; c] -> h -> h -> h -> 14, sigmoid
//   D    4 dense layers  [x*m, m, z ; c] -> h -> h -> h -> 1, sigmoid
//   q^B  conv encoder    1x32x32 -> d_c
//   C    2 dense layers  14 -> 32 -> 2
//
// Image target (A = tp1 patch, B = completed factors):
//   q^A  3 stride-2 conv stages on [x*m, m] (32->16->8->4), dense -> d_z; the
//        16x16 and 8x8 feature maps are kept as skips
//   g^A  dense -> 4x4 map, three 2x2 stride-2 transposed convs with the skips
//        (and the encoder input at 32x32) concatenated, 3x3 conv, sigmoid
//   D    2 conv stages, projected [z ; c] tiled over the 8x8 map, 1 conv stage, dense
//   q^B  4 dense layers  14 -> h -> h -> h -> d_c
//   C    2 conv stages + dense -> 2 logits

namespace cpbigan::adversarial {

using diff::Activation;
using diff::Bound;
using diff::ParamSet;
using diff::Shape;
using diff::Tape;
using diff::Tensor;
using diff::Var;

enum class Target { factors, image };

struct NetworkWidths {
    int dense_hidden = 64;
    std::array<int, 3> channels = {4, 8, 16};
    int classifier_hidden = 32;
};

inline constexpr Activation kHidden = Activation::silu;

template <class T>
struct Encoded {
    Var code;
    std::vector<Var> skips; // image target: [16x16 map, 8x8 map, encoder input]
};

// ---- dense stacks -------------------------------------------------------

template <class T>
void add_mlp4(ParamSet<T>& ps, const std::string& prefix, int in, int hidden, int out, std::uint64_t seed) {
    diff::add_dense(ps, prefix + ".fc1", in, hidden, seed);
    diff::add_dense(ps, prefix + ".fc2", hidden, hidden, seed);
    diff::add_dense(ps, prefix + ".fc3", hidden, hidden, seed);
    diff::add_dense(ps, prefix + ".fc4", hidden, out, seed);
}

template <class T>
Var mlp4(Bound<T>& net, const std::string& prefix, Var x, Activation out_act) {
    x = net.dense(prefix + ".fc1", x, kHidden);
    x = net.dense(prefix + ".fc2", x, kHidden);
    x = net.dense(prefix + ".fc3", x, kHidden);
    return net.dense(prefix + ".fc4", x, out_act);
}

// ---- image encoder shared by q^A (2 input channels) and q^B (1 channel) ---

template <class T>
void add_image_encoder(ParamSet<T>& ps, const std::string& prefix, int in_ch, int out_dim, const NetworkWidths& w,
                       std::uint64_t seed) {
    diff::add_conv(ps, prefix + ".conv1", in_ch, w.channels[0], 3, seed);
    diff::add_conv(ps, prefix + ".conv2", w.channels[0], w.channels[1], 3, seed);
    diff::add_conv(ps, prefix + ".conv3", w.channels[1], w.channels[2], 3, seed);
    diff::add_dense(ps, prefix + ".fc", w.channels[2] * 16, out_dim, seed);
}

template <class T>
Encoded<T> image_encoder(Bound<T>& net, const std::string& prefix, Var x) {
    Encoded<T> e;
    Var h16 = net.conv(prefix + ".conv1", x, 2, 1, kHidden);
    Var h8 = net.conv(prefix + ".conv2", h16, 2, 1, kHidden);
    Var h4 = net.conv(prefix + ".conv3", h8, 2, 1, kHidden);
    e.code = net.dense(prefix + ".fc", diff::flatten(net.tape, h4));
    e.skips = {h16, h8, x};
    return e;
}

// ---- image decoder --------------------------------------------------------

template <class T>
void add_image_decoder(ParamSet<T>& ps, int latent, const NetworkWidths& w, std::uint64_t seed) {
    const auto& c = w.channels;
    diff::add_dense(ps, "g_a.fc", latent, c[2] * 16, seed);
    diff::add_conv_transpose(ps, "g_a.up1", c[2], c[1], 2, 2, seed);          // 4 -> 8
    diff::add_conv_transpose(ps, "g_a.up2", 2 * c[1], c[0], 2, 2, seed);      // 8 -> 16
    diff::add_conv_transpose(ps, "g_a.up3", 2 * c[0], c[0], 2, 2, seed);      // 16 -> 32
    diff::add_conv(ps, "g_a.out", c[0] + 2, 1, 3, seed);
}

template <class T>
Var image_decoder(Bound<T>& net, Var latent, const std::vector<Var>& skips, const NetworkWidths& w) {
    auto& t = net.tape;
    const int n = t.shape(latent)[0];
    Var h = net.dense("g_a.fc", latent, kHidden);
    h = diff::reshape(t, h, Shape{n, w.channels[2], 4, 4});
    h = net.deconv("g_a.up1", h, 2, 0, kHidden);
    h = diff::concat(t, {h, skips[1]});
    h = net.deconv("g_a.up2", h, 2, 0, kHidden);
    h = diff::concat(t, {h, skips[0]});
    h = net.deconv("g_a.up3", h, 2, 0, kHidden);
    h = diff::concat(t, {h, skips[2]});
    return net.conv("g_a.out", h, 1, 1, Activation::sigmoid);
}

// ---- image discriminator ----------------------------------------------------

template <class T>
void add_image_discriminator(ParamSet<T>& ps, int latent, const NetworkWidths& w, std::uint64_t seed) {
    const auto& c = w.channels;
    diff::add_conv(ps, "d.conv1", 2, c[0], 3, seed);
    diff::add_conv(ps, "d.conv2", c[0], c[1], 3, seed);
    diff::add_dense(ps, "d.zproj", latent, c[1], seed);
    diff::add_conv(ps, "d.conv3", 2 * c[1], c[2], 3, seed);
    diff::add_dense(ps, "d.fc", c[2] * 16, 1, seed);
}

template <class T>
Var image_discriminator(Bound<T>& net, Var x_masked, Var m, Var z) {
    auto& t = net.tape;
    Var h = net.conv("d.conv1", diff::concat(t, {x_masked, m}), 2, 1, kHidden);
    h = net.conv("d.conv2", h, 2, 1, kHidden);
    Var zt = diff::tile_spatial(t, net.dense("d.zproj", z, kHidden), 8, 8);
    h = net.conv("d.conv3", diff::concat(t, {h, zt}), 2, 1, kHidden);
    return net.dense("d.fc", diff::flatten(t, h), Activation::sigmoid);
}

// ---- image classifier -------------------------------------------------------

template <class T>
void add_image_classifier(ParamSet<T>& ps, const NetworkWidths& w, std::uint64_t seed) {
    diff::add_conv(ps, "c.conv1", 1, w.channels[0], 3, seed);
    diff::add_conv(ps, "c.conv2", w.channels[0], w.channels[1], 3, seed);
    diff::add_dense(ps, "c.fc", w.channels[1] * 64, 2, seed);
}

template <class T>
Var image_classifier(Bound<T>& net, Var x) {
    Var h = net.conv("c.conv1", x, 2, 1, kHidden);
    h = net.conv("c.conv2", h, 2, 1, kHidden);
    return net.dense("c.fc", diff::flatten(net.tape, h));
}

template <class T>
void add_factor_classifier(ParamSet<T>& ps, const NetworkWidths& w, std::uint64_t seed) {
    diff::add_dense(ps, "c.fc1", kNumFactors, w.classifier_hidden, seed);
    diff::add_dense(ps, "c.fc2", w.classifier_hidden, 2, seed);
}

template <class T>
Var factor_classifier(Bound<T>& net, Var x) {
    return net.dense("c.fc2", net.dense("c.fc1", x, kHidden));
}

} // namespace cpbigan::adversarial
