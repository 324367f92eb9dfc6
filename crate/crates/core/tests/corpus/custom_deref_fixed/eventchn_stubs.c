#include <caml/mlvalues.h>
#include <caml/memory.h>
#include <caml/custom.h>
#include <caml/fail.h>

static inline xenevtchn_handle *xce_of_val(value v)
{
        xenevtchn_handle *xce = *(xenevtchn_handle **)Data_custom_val(v);
        return xce;
}

CAMLprim value stub_eventchn_notify(value xce_val, value port)
{
        CAMLparam2(xce_val, port);
        xenevtchn_handle *xce = xce_of_val(xce_val);
        int c_port = Int_val(port);
        int rc;

        caml_enter_blocking_section();

        rc = xenevtchn_notify(xce, c_port);

        caml_leave_blocking_section();

        if (rc == -1)
                caml_failwith("evtchn notify failed");

        CAMLreturn(Val_unit);
}
