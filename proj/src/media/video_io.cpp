#include "vamark/media/video_io.hpp"

#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "vamark/media/image_io.hpp"

namespace fs = std::filesystem;

namespace vamark {

namespace {

bool has_image_ext(const fs::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return e == ".png";
}

VideoSequence load_frame_dir(const fs::path& dir, double frame_rate) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && has_image_ext(entry.path())) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("zero frames in directory: " + dir.string());

  VideoSequence video;
  video.frame_rate = frame_rate;
  for (size_t t = 0; t < files.size(); ++t) {
    Tensor img = load_image(files[t].string());
    if (img.dim(0) == 1) {  // promote grayscale to RGB
      Tensor rgb({3, img.dim(1), img.dim(2)});
      for (int c = 0; c < 3; ++c) std::copy(img.data(), img.data() + img.numel(), rgb.data() + c * img.numel());
      img = std::move(rgb);
    }
    if (t == 0) {
      video.frames = Tensor({static_cast<int>(files.size()), 3, img.dim(1), img.dim(2)});
    } else if (img.dim(1) != video.H() || img.dim(2) != video.W()) {
      throw std::runtime_error("inconsistent dimensions: frame " + files[t].filename().string() + " is " +
                               std::to_string(img.dim(2)) + "x" + std::to_string(img.dim(1)) + ", expected " +
                               std::to_string(video.W()) + "x" + std::to_string(video.H()));
    }
    std::copy(img.data(), img.data() + img.numel(), video.frames.data() + static_cast<std::int64_t>(t) * img.numel());
  }
  return video;
}

// Container ingest only: extract frames with an external decoder, then load
// the resulting frame directory.
VideoSequence ingest_container(const fs::path& file, double frame_rate) {
  const char* decoder = std::getenv("VAMARK_DECODER");
  const std::string tool = decoder ? decoder : "ffmpeg";
  if (std::system(("command -v " + tool + " >/dev/null 2>&1").c_str()) != 0)
    throw std::runtime_error("external decoder missing: '" + tool +
                             "' not found; container ingest requires it (frame directories do not)");
  fs::path tmp = fs::temp_directory_path() / ("vamark_ingest_" + std::to_string(::getpid()));
  fs::create_directories(tmp);
  const std::string cmd = tool + " -v error -i '" + file.string() + "' '" + (tmp / "frame_%06d.png").string() + "'";
  if (std::system(cmd.c_str()) != 0) {
    fs::remove_all(tmp);
    throw std::runtime_error("container decode failed: " + file.string());
  }
  VideoSequence v = load_frame_dir(tmp, frame_rate);
  fs::remove_all(tmp);
  return v;
}

}  // namespace

VideoSequence load_video(const std::string& path, double frame_rate) {
  const fs::path p(path);
  if (!fs::exists(p)) throw std::runtime_error("missing path: " + path);
  VideoSequence v = fs::is_directory(p) ? load_frame_dir(p, frame_rate) : ingest_container(p, frame_rate);
  v.validate();
  return v;
}

void save_video(const std::string& dir, const VideoSequence& video) {
  fs::create_directories(dir);
  char name[32];
  for (int t = 0; t < video.T(); ++t) {
    std::snprintf(name, sizeof(name), "frame_%06d.png", t);
    save_image((fs::path(dir) / name).string(), video.frame(t));
  }
}

}  // namespace vamark
