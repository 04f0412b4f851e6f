#pragma once

#include <cstdint>
#include <vector>

#include "vamark/media/types.hpp"

namespace vamark {

// Desk-scale synthetic corpus: moving textured shapes over textured
// backgrounds, with paired tone-mixture audio. Fully deterministic per
// (seed, index); items can be generated lazily.
struct CorpusConfig {
  int clips = 40;
  int frames = 12;
  int height = 64;
  int width = 64;
  double frame_rate = 8.0;
  int sample_rate = 16000;
  double audio_seconds = 3.0;
  std::uint64_t seed = 7;
};

VideoSequence synthetic_clip(const CorpusConfig& cfg, int index);
AudioSignal synthetic_audio(const CorpusConfig& cfg, int index);

struct SyntheticCorpus {
  std::vector<VideoSequence> videos;
  std::vector<AudioSignal> audios;
};

SyntheticCorpus make_synthetic_corpus(const CorpusConfig& cfg);

}  // namespace vamark
