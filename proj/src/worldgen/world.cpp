#include "relay/worldgen/world.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace relay::world {

const char* shape_name(Shape s) {
  switch (s) {
    case Shape::Square: return "square";
    case Shape::Circle: return "circle";
    case Shape::Triangle: return "triangle";
    case Shape::Cross: return "cross";
  }
  throw ContractError("shape_name: bad shape");
}

const char* color_name(Color c) {
  switch (c) {
    case Color::Red: return "red";
    case Color::Green: return "green";
    case Color::Blue: return "blue";
    case Color::Yellow: return "yellow";
    case Color::Magenta: return "magenta";
    case Color::Cyan: return "cyan";
    case Color::White: return "white";
    case Color::Orange: return "orange";
  }
  throw ContractError("color_name: bad color");
}

std::array<double, 3> color_rgb(Color c) {
  switch (c) {
    case Color::Red: return {1.0, 0.0, 0.0};
    case Color::Green: return {0.0, 1.0, 0.0};
    case Color::Blue: return {0.0, 0.0, 1.0};
    case Color::Yellow: return {1.0, 1.0, 0.0};
    case Color::Magenta: return {1.0, 0.0, 1.0};
    case Color::Cyan: return {0.0, 1.0, 1.0};
    case Color::White: return {1.0, 1.0, 1.0};
    case Color::Orange: return {1.0, 0.5, 0.0};
  }
  throw ContractError("color_rgb: bad color");
}

bool shape_pixel(Shape s, int size, int r, int c) {
  const int e = bitmap_edge(size);
  if (r < 0 || c < 0 || r >= e || c >= e) return false;
  // At 2x2 no formula keeps the shapes apart, so those are drawn by hand.
  const double mid = (e - 1) / 2.0;
  switch (s) {
    case Shape::Square:
      return true;
    case Shape::Circle: {
      if (e == 2) return !(r == 1 && c == 1);
      // L2 disc just tight enough to drop the corners at every size.
      const double rr = (r - mid) * (r - mid) + (c - mid) * (c - mid);
      return rr <= mid * mid + 0.5;
    }
    case Shape::Triangle:
      if (e == 2) return !(r == 0 && c == 1);
      // apex on the top row, base on the bottom row
      return std::abs(c - mid) <= r * mid / (e - 1) + 0.5;
    case Shape::Cross:
      if (e == 2) return r != c;
      return r == c || r + c == e - 1;
  }
  return false;
}

const SymbolicObject& SymbolicVideo::object(int id) const {
  for (const SymbolicObject& o : objects)
    if (o.id == id) return o;
  throw IndexError("SymbolicVideo: no object with id " + std::to_string(id));
}

Color SymbolicVideo::color_at(const SymbolicObject& o, int t) const {
  Color c = o.color;
  for (const Event& e : events) {
    if (e.frame > t) break;  // events are frame-ordered
    if (e.kind == EventKind::Recolor && e.object_id == o.id) {
      c = static_cast<Color>(e.payload);
    }
  }
  return c;
}

namespace {

[[noreturn]] void fail(const std::string& what) {
  throw GenerationError("invalid video: " + what);
}

}  // namespace

void check_video(const SymbolicVideo& v) {
  if (v.T < 1) fail("T < 1");
  if (v.H < 16 || v.W < 16) fail("canvas smaller than 16x16");

  std::set<int> ids;
  for (const SymbolicObject& o : v.objects) {
    std::ostringstream tag;
    tag << "object " << o.id;
    if (!ids.insert(o.id).second) fail(tag.str() + ": duplicate id");
    if (o.size < 2 || o.size > 4) fail(tag.str() + ": size outside {2,3,4}");
    if (o.row < 0 || o.col < 0 || o.row + o.edge() > v.H || o.col + o.edge() > v.W)
      fail(tag.str() + ": extends outside the canvas");
    if (o.first_frame < 0 || o.first_frame > o.last_frame || o.last_frame >= v.T)
      fail(tag.str() + ": lifespan outside [0, T)");
  }

  // Static placement: bounding boxes never overlap, even across time.
  for (std::size_t i = 0; i < v.objects.size(); ++i) {
    for (std::size_t j = i + 1; j < v.objects.size(); ++j) {
      const SymbolicObject &a = v.objects[i], &b = v.objects[j];
      const bool apart = a.row + a.edge() <= b.row || b.row + b.edge() <= a.row ||
                         a.col + a.edge() <= b.col || b.col + b.edge() <= a.col;
      if (!apart) {
        std::ostringstream os;
        os << "objects " << a.id << " and " << b.id << " overlap";
        fail(os.str());
      }
    }
  }

  // Events: ordered, one per (object, frame), consistent with lifespans.
  std::set<std::pair<int, int>> slots;
  for (std::size_t i = 0; i < v.events.size(); ++i) {
    const Event& e = v.events[i];
    if (i > 0) {
      const Event& p = v.events[i - 1];
      if (e.frame < p.frame ||
          (e.frame == p.frame && e.object_id <= p.object_id))
        fail("events not strictly ordered by (frame, object)");
    }
    if (!slots.insert({e.object_id, e.frame}).second)
      fail("two events for one object in one frame");
    if (!ids.count(e.object_id)) fail("event references unknown object");
    const SymbolicObject& o = v.object(e.object_id);
    std::ostringstream tag;
    tag << "event at frame " << e.frame << " on object " << e.object_id;
    switch (e.kind) {
      case EventKind::Appear:
        if (e.frame != o.first_frame || o.first_frame == 0)
          fail(tag.str() + ": appear inconsistent with lifespan");
        break;
      case EventKind::Vanish:
        if (e.frame != o.last_frame + 1 || o.last_frame + 1 >= v.T)
          fail(tag.str() + ": vanish inconsistent with lifespan");
        break;
      case EventKind::Recolor:
        if (e.payload < 0 || e.payload >= kColorCount)
          fail(tag.str() + ": recolor payload not a color");
        if (e.frame <= o.first_frame || e.frame > o.last_frame)
          fail(tag.str() + ": recolor outside (first, last]");
        break;
    }
  }

  // Every off-origin lifespan boundary must be announced by an event.
  for (const SymbolicObject& o : v.objects) {
    int appears = 0, vanishes = 0;
    Color cur = o.color;
    for (const Event& e : v.events) {
      if (e.object_id != o.id) continue;
      if (e.kind == EventKind::Appear) ++appears;
      if (e.kind == EventKind::Vanish) ++vanishes;
      if (e.kind == EventKind::Recolor) {
        if (static_cast<Color>(e.payload) == cur)
          fail("recolor to the current color is a no-op");
        cur = static_cast<Color>(e.payload);
      }
    }
    if (appears != (o.first_frame > 0 ? 1 : 0))
      fail("object " + std::to_string(o.id) + ": appear event count wrong");
    if (vanishes != (o.last_frame < v.T - 1 ? 1 : 0))
      fail("object " + std::to_string(o.id) + ": vanish event count wrong");
  }
}

std::vector<std::pair<int, int>> even_spans(int total, int parts) {
  if (parts < 1 || parts > total) {
    throw ConfigError("even_spans: cannot split " + std::to_string(total) +
                      " items into " + std::to_string(parts) + " spans");
  }
  std::vector<std::pair<int, int>> spans;
  const int base = total / parts, extra = total % parts;
  int at = 0;
  for (int i = 0; i < parts; ++i) {
    const int len = base + (i < extra ? 1 : 0);
    spans.emplace_back(at, at + len - 1);
    at += len;
  }
  return spans;
}

std::pair<int, int> time_bucket_span(int T, int bucket) {
  if (bucket < 0 || bucket >= kTimeBuckets) {
    throw IndexError("time_bucket_span: bucket " + std::to_string(bucket) +
                     " outside [0, " + std::to_string(kTimeBuckets) + ")");
  }
  return even_spans(T, kTimeBuckets)[static_cast<std::size_t>(bucket)];
}

int position_bucket(const SymbolicObject& o, int H, int W) {
  const int br = std::min(2, o.center_row() * 3 / H);
  const int bc = std::min(2, o.center_col() * 3 / W);
  return br * 3 + bc;
}

int lifespan_bucket(const SymbolicObject& o, int T) {
  if (o.first_frame == 0 && o.last_frame == T - 1) return 0;
  if (o.last_frame < T / 2) return 1;
  if (o.first_frame >= T / 2) return 2;
  return 3;
}

const char* position_bucket_name(int b) {
  static const char* names[kPositionBuckets] = {
      "top-left",    "top",    "top-right",
      "left",        "center", "right",
      "bottom-left", "bottom", "bottom-right"};
  if (b < 0 || b >= kPositionBuckets) throw IndexError("bad position bucket");
  return names[b];
}

const char* lifespan_bucket_name(int b) {
  static const char* names[kLifespanBuckets] = {"whole", "early", "late",
                                                "partial"};
  if (b < 0 || b >= kLifespanBuckets) throw IndexError("bad lifespan bucket");
  return names[b];
}

}  // namespace relay::world
