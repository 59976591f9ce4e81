// serialize.hpp - on-disk formats: embeddings, named tensors, PGM, key=value config
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "moelab/router.hpp"
#include "moelab/tensor.hpp"

namespace moelab {

// Embedding container (extension .moeb): magic "MOEB", then little-endian
// u32 version (1), u32 B, S, H, then B*S*H float32 payload in row-major order.
// save narrows doubles to float32; load widens back to double. Malformed files
// throw std::runtime_error naming the byte offset and the expected vs actual
// content. states must be rank-3 (B x S x H).
void save_embeddings(const std::string& path, const Tensor& states);
Tensor load_embeddings(const std::string& path);

// Named-tensor container (extension .moet): magic "MOET", little-endian u32
// version (1), u32 tensor count, then per tensor: u32 name length + name bytes,
// u32 rank, u32 dims, float64 payload. Doubles round-trip bit for bit.
void save_tensors(const std::string& path,
                  const std::vector<std::pair<std::string, const Tensor*>>& tensors);
std::vector<std::pair<std::string, Tensor>> load_tensors(const std::string& path);

// Parameter snapshots through the named-tensor container. load matches entries
// by name and shape and requires the file and the parameter list to agree
// exactly (no missing, no extra names).
void save_parameters(const std::string& path, const std::vector<NamedParam>& params);
void load_parameters(const std::string& path, const std::vector<NamedParam>& params);

// Binary 8-bit PGM (P5). matrix must be rank-2; each value is clamped to [0, 1]
// and written as round(value * 255).
void write_pgm(const std::string& path, const Tensor& matrix);

// Flat key=value configuration. '#' starts a comment, blank lines are skipped,
// whitespace around keys and values is trimmed. Pairs keep file order; a
// repeated key keeps both occurrences (consumers decide the policy).
std::vector<std::pair<std::string, std::string>> parse_kv_text(const std::string& text);
std::vector<std::pair<std::string, std::string>> parse_kv_file(const std::string& path);
std::string format_kv(const std::vector<std::pair<std::string, std::string>>& pairs);

}  // namespace moelab
