#pragma once

#include <array>
#include <string>
#include <vector>

#include "relay/errors.hpp"

namespace relay::world {

enum class Shape : int { Square = 0, Circle, Triangle, Cross };
enum class Color : int { Red = 0, Green, Blue, Yellow, Magenta, Cyan, White, Orange };

inline constexpr int kShapeCount = 4;
inline constexpr int kColorCount = 8;

// Number of coarse time buckets referenced by segment queries. Fixed and
// independent of how many agents a video is later partitioned across.
inline constexpr int kTimeBuckets = 6;

const char* shape_name(Shape s);
const char* color_name(Color c);
std::array<double, 3> color_rgb(Color c);

/// Side length of the square bitmap for a given object size. A size-s square
/// covers exactly s*s canvas pixels.
inline int bitmap_edge(int size) { return size; }

/// Whether bitmap cell (r, c) is lit for this shape at this size.
/// Squares fill the box, circles are discs with the corners cut, triangles
/// widen downward from a top apex, crosses are the two diagonals. The four
/// bitmaps are pairwise distinct for every size in 2..4.
bool shape_pixel(Shape s, int size, int r, int c);

struct SymbolicObject {
  int id = 0;
  Shape shape = Shape::Square;
  Color color = Color::Red;  // color at first_frame; recolor events override later
  int row = 0, col = 0;      // top-left of the bitmap on the canvas
  int size = 2;              // in {2,3,4}
  int first_frame = 0, last_frame = 0;  // inclusive lifespan

  int edge() const { return bitmap_edge(size); }
  int center_row() const { return row + edge() / 2; }
  int center_col() const { return col + edge() / 2; }
  bool alive_at(int t) const { return first_frame <= t && t <= last_frame; }
};

enum class EventKind : int { Appear = 0, Vanish, Recolor };

/// A dynamic transition. Appear fires on the first alive frame (only for
/// objects not present from frame 0), Vanish on the first frame after the
/// lifespan, Recolor takes effect at `frame` with the new color in payload.
struct Event {
  int frame = 0;
  EventKind kind = EventKind::Appear;
  int object_id = 0;
  int payload = -1;  // color index for Recolor, -1 otherwise
};

struct SymbolicVideo {
  int T = 1, H = 32, W = 32;
  std::vector<SymbolicObject> objects;  // ordered by id
  std::vector<Event> events;            // ordered by (frame, object id)

  const SymbolicObject& object(int id) const;
  Color color_at(const SymbolicObject& o, int t) const;
};

/// Validates every structural invariant; throws GenerationError naming the
/// first violation. Used as the generator's own acceptance gate and as the
/// test oracle for generated videos.
void check_video(const SymbolicVideo& v);

/// Splits `total` items into `parts` contiguous spans [first, last] whose
/// lengths differ by at most one, longer spans first.
std::vector<std::pair<int, int>> even_spans(int total, int parts);

/// Frame span (inclusive) of time bucket j under kTimeBuckets.
std::pair<int, int> time_bucket_span(int T, int bucket);

// Caption / query bucketing ---------------------------------------------

/// 3x3 spatial bucket of the object's center, row-major in 0..8.
int position_bucket(const SymbolicObject& o, int H, int W);

/// 0 = whole video, 1 = ends in first half, 2 = starts in second half,
/// 3 = anything else.
int lifespan_bucket(const SymbolicObject& o, int T);

inline constexpr int kPositionBuckets = 9;
inline constexpr int kLifespanBuckets = 4;

const char* position_bucket_name(int b);
const char* lifespan_bucket_name(int b);

}  // namespace relay::world
