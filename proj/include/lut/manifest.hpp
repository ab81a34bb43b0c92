#pragma once

#include <filesystem>
#include <vector>

#include "lut/corpus.hpp"
#include "lut/tensor.hpp"
#include "lut/vocab.hpp"

namespace lut {

inline constexpr int kManifestVersion = 1;

// Line-delimited JSON. The first line is a header
//   {"format": "lut-manifest", "version": 1}
// and every following line one utterance:
//   {"utt_id": str, "features": [[f, ...], ...] | "relative/path.feat",
//    "z": [token, ...], "y": [token, ...] | null, "speaker_id": int,
//    "intent_id": int}
// Tokens are vocabulary strings. A path is resolved against the manifest's
// directory and names a raw feature file.
struct ManifestOptions {
  // Write features to <manifest>.features/<utt_id>.feat instead of inline.
  bool external_features = false;
};

void write_manifest(const std::filesystem::path& path, const std::vector<Utterance>& utts,
                    const Vocab& source, const Vocab& target,
                    const ManifestOptions& options = {});
std::vector<Utterance> read_manifest(const std::filesystem::path& path, const Vocab& source,
                                     const Vocab& target);

// Raw feature file: u32 frames, u32 width, then frames*width float32 values,
// all little-endian.
void write_feature_file(const std::filesystem::path& path, const Tensor& frames);
Tensor read_feature_file(const std::filesystem::path& path);

}  // namespace lut
