#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>

#include "agdc/model.hpp"

namespace agdc {

/// Binary container: magic "AGDCCKPT", u32 version, u32 header length, JSON
/// header (schema, model and diffusion configs, EOS alpha), u32 group count,
/// then per group a u32-length name, u32 rows, u32 cols and rows*cols
/// little-endian float32 values in row-major order.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const Model& model);
void save_checkpoint(const std::string& path, const Model& model);

/// Builds a model from the header and fills its parameters. Missing,
/// unexpected or mis-shaped groups are rejected.
std::unique_ptr<Model> read_checkpoint(std::istream& in);
std::unique_ptr<Model> load_checkpoint(const std::string& path);

/// Loads values into an existing model whose configuration must match.
void load_parameters(std::istream& in, Model& model);

}  // namespace agdc
