#pragma once

#include <string>

#include "vamark/media/types.hpp"

namespace vamark {

// 16-bit PCM WAV. Multi-channel input is downmixed to mono by channel mean;
// when target_rate differs from the file rate the signal is resampled.
AudioSignal load_audio(const std::string& path, int target_rate = 16000);
void save_audio(const std::string& path, const AudioSignal& audio);

// Linear-interpolation resample to a new rate (length scales accordingly).
AudioSignal resample_to_rate(const AudioSignal& in, int new_rate);

}  // namespace vamark
