#include "ssvae/models/networks.hpp"

#include <sstream>

#include "ssvae/error.hpp"
#include "ssvae/nn/ops.hpp"

namespace ssvae::models {

namespace {

std::string geom_list(const std::vector<ConvGeometry>& gs) {
  std::ostringstream out;
  for (std::size_t i = 0; i < gs.size(); ++i) {
    const auto& g = gs[i];
    out << (i ? "," : "") << g.in_channels << 'x' << g.out_channels << 'x' << g.kernel << 'x' << g.stride << 'x'
        << g.padding;
  }
  return out.str();
}

std::vector<ConvGeometry> parse_geom_list(const std::string& text) {
  std::vector<ConvGeometry> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    ConvGeometry g;
    char x1, x2, x3, x4;
    std::istringstream is(item);
    if (!(is >> g.in_channels >> x1 >> g.out_channels >> x2 >> g.kernel >> x3 >> g.stride >> x4 >> g.padding) ||
        x1 != 'x' || x2 != 'x' || x3 != 'x' || x4 != 'x') {
      throw DataError("malformed layer geometry '" + item + "'");
    }
    out.push_back(g);
  }
  return out;
}

const std::string& need(const std::map<std::string, std::string>& meta, const std::string& key) {
  auto it = meta.find(key);
  if (it == meta.end()) throw DataError("checkpoint is missing architecture key " + key);
  return it->second;
}

void check_chain(const std::vector<ConvGeometry>& gs, std::size_t first_in, const char* what) {
  if (gs.empty()) throw ConfigError(std::string(what) + ": needs at least one layer");
  std::size_t ch = first_in;
  for (const auto& g : gs) {
    if (g.in_channels != ch) {
      throw ConfigError(std::string(what) + ": layer expects " + std::to_string(g.in_channels) +
                        " input channels but receives " + std::to_string(ch));
    }
    if (g.stride == 0 || g.kernel == 0 || g.out_channels == 0) {
      throw ConfigError(std::string(what) + ": kernel, stride and channels must be positive");
    }
    ch = g.out_channels;
  }
}

RngStream& dropout_rng(const ForwardContext& ctx) {
  if (!ctx.rng) throw ConfigError("training-mode forward pass needs an RNG stream for dropout");
  return *ctx.rng;
}

}  // namespace

std::size_t encoder_feature_length(const ArchConfig& arch) {
  std::size_t len = arch.input_dim;
  for (const auto& g : arch.encoder_convs) len = nn::conv1d_output_length(len, g.kernel, g.stride, g.padding);
  return len;
}

std::size_t classifier_feature_length(const ArchConfig& arch) {
  std::size_t len = arch.input_dim;
  for (const auto& g : arch.classifier_convs) {
    len = nn::conv1d_output_length(len, g.kernel, g.stride, g.padding);
    if (len < arch.classifier_pool) throw ConfigError("classifier: feature length shorter than pool width");
    len /= arch.classifier_pool;
  }
  return len;
}

std::size_t decoder_start_length(const ArchConfig& arch) {
  std::size_t len = arch.input_dim;
  for (auto it = arch.decoder_tconvs.rbegin(); it != arch.decoder_tconvs.rend(); ++it) {
    if (len < it->kernel || (len - it->kernel) % it->stride != 0) {
      throw ConfigError("decoder: transpose-conv geometry cannot produce length " + std::to_string(len) +
                        " (kernel " + std::to_string(it->kernel) + ", stride " + std::to_string(it->stride) + ")");
    }
    len = (len - it->kernel) / it->stride + 1;
  }
  return len;
}

void ArchConfig::validate() const {
  if (input_dim == 0 || latent_dim == 0) throw ConfigError("input and latent dimensions must be positive");
  if (latent_dim >= input_dim) throw ConfigError("latent_dim must be smaller than input_dim");
  if (dropout < 0.0f || dropout >= 1.0f) throw ConfigError("dropout rate must be in [0, 1)");
  check_chain(encoder_convs, 1, "encoder");
  check_chain(classifier_convs, 1, "classifier");
  check_chain(decoder_tconvs, decoder_tconvs.empty() ? 0 : decoder_tconvs.front().in_channels, "decoder");
  if (decoder_tconvs.back().out_channels != 1) throw ConfigError("decoder: last layer must have 1 output channel");
  if (classifier_pool == 0) throw ConfigError("classifier: pool width must be positive");
  encoder_feature_length(*this);
  classifier_feature_length(*this);
  decoder_start_length(*this);
}

ArchConfig tiny_arch() {
  ArchConfig a;
  a.input_dim = 64;
  a.latent_dim = 4;
  a.encoder_convs = {{1, 2, 4, 2, 0}, {2, 3, 4, 2, 0}};
  a.decoder_tconvs = {{3, 2, 5, 2, 0}, {2, 2, 4, 2, 0}, {2, 1, 1, 1, 0}};
  a.classifier_convs = {{1, 2, 4, 2, 0}, {2, 3, 4, 2, 0}};
  return a;
}

Encoder::Encoder(nn::ParamStore& store, const std::string& prefix, const ArchConfig& arch, std::size_t out_dim,
                 RngStream& init)
    : input_dim_(arch.input_dim), out_dim_(out_dim), dropout_(arch.dropout) {
  arch.validate();
  for (std::size_t i = 0; i < arch.encoder_convs.size(); ++i) {
    const std::string name = prefix + ".conv" + std::to_string(i + 1);
    convs_.emplace_back(store, name, arch.encoder_convs[i], init, false);
    norms_.emplace_back(store, prefix + ".bn" + std::to_string(i + 1), arch.encoder_convs[i].out_channels,
                        arch.bn_momentum);
  }
  const std::size_t features = arch.encoder_convs.back().out_channels * encoder_feature_length(arch);
  fc_ = nn::DenseLayer(store, prefix + ".fc", features, out_dim, init);
}

Var Encoder::forward(const Var& x, const ForwardContext& ctx) const {
  if (x.value().rank() != 2 || x.dim(1) != input_dim_) {
    throw ConfigError("encoder: expected input [B," + std::to_string(input_dim_) + "], got " + shape_str(x.shape()));
  }
  Var h = nn::reshape(x, {x.dim(0), 1, input_dim_});
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    h = nn::relu(norms_[i].forward(convs_[i].forward(h), ctx.training));
    if (ctx.training && dropout_ > 0.0f) h = nn::dropout(h, dropout_, dropout_rng(ctx), true);
  }
  h = nn::reshape(h, {h.dim(0), h.dim(1) * h.dim(2)});
  return fc_.forward(h);
}

Decoder::Decoder(nn::ParamStore& store, const std::string& prefix, const ArchConfig& arch, std::size_t in_dim,
                 RngStream& init)
    : in_dim_(in_dim), output_dim_(arch.input_dim) {
  arch.validate();
  start_channels_ = arch.decoder_tconvs.front().in_channels;
  start_len_ = decoder_start_length(arch);
  fc_ = nn::DenseLayer(store, prefix + ".fc", in_dim, start_channels_ * start_len_, init);
  for (std::size_t i = 0; i < arch.decoder_tconvs.size(); ++i) {
    tconvs_.emplace_back(store, prefix + ".tconv" + std::to_string(i + 1), arch.decoder_tconvs[i], init);
  }
}

Var Decoder::forward(const Var& in) const {
  if (in.value().rank() != 2 || in.dim(1) != in_dim_) {
    throw ConfigError("decoder: expected input [B," + std::to_string(in_dim_) + "], got " + shape_str(in.shape()));
  }
  const std::size_t batch = in.dim(0);
  Var h = nn::relu(fc_.forward(in));
  h = nn::reshape(h, {batch, start_channels_, start_len_});
  for (std::size_t i = 0; i < tconvs_.size(); ++i) {
    h = tconvs_[i].forward(h);
    if (i + 1 < tconvs_.size()) h = nn::relu(h);
  }
  return nn::reshape(h, {batch, output_dim_});
}

ClassifierNet::ClassifierNet(nn::ParamStore& store, const std::string& prefix, const ArchConfig& arch,
                             std::size_t classes, RngStream& init)
    : input_dim_(arch.input_dim), classes_(classes), pool_(arch.classifier_pool), dropout_(arch.dropout) {
  arch.validate();
  if (classes < 2) throw ConfigError("classifier: need at least 2 classes");
  for (std::size_t i = 0; i < arch.classifier_convs.size(); ++i) {
    convs_.emplace_back(store, prefix + ".conv" + std::to_string(i + 1), arch.classifier_convs[i], init);
  }
  const std::size_t features = arch.classifier_convs.back().out_channels * classifier_feature_length(arch);
  fc_ = nn::DenseLayer(store, prefix + ".fc", features, classes, init);
}

Var ClassifierNet::logits(const Var& x, const ForwardContext& ctx) const {
  if (x.value().rank() != 2 || x.dim(1) != input_dim_) {
    throw ConfigError("classifier: expected input [B," + std::to_string(input_dim_) + "], got " +
                      shape_str(x.shape()));
  }
  Var h = nn::reshape(x, {x.dim(0), 1, input_dim_});
  for (const auto& conv : convs_) h = nn::max_pool1d(nn::relu(conv.forward(h)), pool_);
  if (ctx.training && dropout_ > 0.0f) h = nn::dropout(h, dropout_, dropout_rng(ctx), true);
  h = nn::reshape(h, {h.dim(0), h.dim(1) * h.dim(2)});
  return fc_.forward(h);
}

void arch_to_meta(const ArchConfig& arch, std::map<std::string, std::string>& meta) {
  meta["input_dim"] = std::to_string(arch.input_dim);
  meta["latent_dim"] = std::to_string(arch.latent_dim);
  std::ostringstream d, m;
  d.precision(9);
  m.precision(9);
  d << arch.dropout;
  m << arch.bn_momentum;
  meta["dropout"] = d.str();
  meta["bn_momentum"] = m.str();
  meta["encoder_convs"] = geom_list(arch.encoder_convs);
  meta["decoder_tconvs"] = geom_list(arch.decoder_tconvs);
  meta["classifier_convs"] = geom_list(arch.classifier_convs);
  meta["classifier_pool"] = std::to_string(arch.classifier_pool);
}

ArchConfig arch_from_meta(const std::map<std::string, std::string>& meta) {
  ArchConfig a;
  try {
    a.input_dim = std::stoull(need(meta, "input_dim"));
    a.latent_dim = std::stoull(need(meta, "latent_dim"));
    a.dropout = std::stof(need(meta, "dropout"));
    a.bn_momentum = std::stof(need(meta, "bn_momentum"));
    a.classifier_pool = std::stoull(need(meta, "classifier_pool"));
  } catch (const std::logic_error& e) {
    if (dynamic_cast<const DataError*>(&e)) throw;
    throw DataError(std::string("malformed architecture value in checkpoint: ") + e.what());
  }
  a.encoder_convs = parse_geom_list(need(meta, "encoder_convs"));
  a.decoder_tconvs = parse_geom_list(need(meta, "decoder_tconvs"));
  a.classifier_convs = parse_geom_list(need(meta, "classifier_convs"));
  a.validate();
  return a;
}

}  // namespace ssvae::models
