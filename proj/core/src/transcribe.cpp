#include "amt/transcribe.hpp"

#include "amt/decode.hpp"
#include "amt/spectrogram.hpp"

namespace amt {

template <typename S>
std::vector<NoteEvent> transcribe_clip(const model::TranscriptionModel<S>& m,
                                       const AudioClip& clip, const data::InstrumentBank& bank,
                                       double threshold) {
  const model::ModelConfig& cfg = m.config();
  if (clip.sample_rate != kSampleRate)
    throw std::invalid_argument("transcribe: expected 16 kHz audio");
  const int64_t window = cfg.window_samples();
  const int64_t total = static_cast<int64_t>(clip.samples.size());
  const int64_t n_windows = std::max<int64_t>(1, (total + window - 1) / window);

  std::vector<NoteEvent> notes;
  for (int64_t w = 0; w < n_windows; ++w) {
    const int64_t start = w * window;
    AudioClip piece;
    piece.sample_rate = kSampleRate;
    piece.samples.assign(static_cast<size_t>(window), 0.0f);
    const int64_t n = std::min<int64_t>(window, total - start);
    if (n > 0)
      std::copy(clip.samples.begin() + start, clip.samples.begin() + start + n,
                piece.samples.begin());
    const nn::Tensor<S> spec = dsp::stft_logmag<S>(piece, cfg.stft());
    const auto rolls = m.infer(spec);
    std::vector<NoteEvent> piece_notes = decode::decode(rolls.onset, rolls.frame, bank, threshold);
    const double t0 = static_cast<double>(start) / kSampleRate;
    for (NoteEvent& note : piece_notes) {
      note.onset += t0;
      note.offset += t0;
      notes.push_back(note);
    }
  }
  sort_notes(notes);
  return notes;
}

template std::vector<NoteEvent> transcribe_clip<float>(const model::TranscriptionModel<float>&,
                                                       const AudioClip&,
                                                       const data::InstrumentBank&, double);
template std::vector<NoteEvent> transcribe_clip<double>(const model::TranscriptionModel<double>&,
                                                        const AudioClip&,
                                                        const data::InstrumentBank&, double);

}  // namespace amt
